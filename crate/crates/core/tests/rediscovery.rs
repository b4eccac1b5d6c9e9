use procmine::inductive::ProcessTree;
use procmine::models::tree_to_petri;
use procmine_testkit::{enumerate_language, net_language, random_tree, rediscovery_instance, tree_accepts};
use rand::rngs::StdRng;
use rand::SeedableRng;

#[test]
fn inductive_rediscovery_fits_perfectly() {
    let failures: Vec<String> = (0..100).filter_map(|seed| rediscovery_instance(seed).err()).collect();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn converted_nets_have_the_tree_language() {
    let mut rng = StdRng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 60 {
        let tree: ProcessTree = random_tree(&mut rng, 5, 4);
        let Some(lang) = enumerate_language(&tree, 1, 2_000) else {
            continue;
        };
        let max_len = lang.iter().map(Vec::len).max().unwrap_or(0);
        let net = tree_to_petri(&tree);
        let Some(net_lang) = net_language(&net, max_len, 200_000) else {
            continue;
        };
        for t in &lang {
            assert!(net_lang.contains(t), "{tree}: net rejects {t:?}");
        }
        for t in &net_lang {
            assert!(tree_accepts(&tree, t), "{tree}: net accepts foreign {t:?}");
        }
        checked += 1;
    }
}
