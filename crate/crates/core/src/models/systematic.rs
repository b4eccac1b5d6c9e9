use super::{import_pnml, NetError, PetriNet};

/// Location of the bundled model inside the source tree.
pub const SYSTEMATIC_MODEL_PATH: &str = "crates/core/assets/systematic_sepsis.pnml";

const SYSTEMATIC_PNML: &str = include_str!("../../assets/systematic_sepsis.pnml");

/// Hand-authored emergency-ward pathway: registration, optional triage
/// forms, optional infusion and antibiotics in parallel, admission to normal
/// or intensive care with transfers, one of five releases and an optional
/// return. Lab measurements are self-loops on a place that stays marked
/// from registration to the end.
pub fn build_systematic_model() -> Result<PetriNet, NetError> {
    import_pnml(SYSTEMATIC_PNML).map_err(|e| NetError::Load(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_with_expected_alphabet() {
        let net = build_systematic_model().unwrap();
        let labels = net.labels();
        for a in [
            "ER Registration",
            "ER Triage",
            "ER Sepsis Triage",
            "IV Liquid",
            "IV Antibiotics",
            "Admission NC",
            "Admission IC",
            "Release A",
            "Release E",
            "Return ER",
            "CRP",
            "Leukocytes",
            "LacticAcid",
        ] {
            assert!(labels.contains(a), "{a}");
        }
        assert_eq!(labels.len(), 16);
        assert_eq!(net.source_places().len(), 1);
        assert_eq!(net.sink_places().len(), 1);
    }
}
