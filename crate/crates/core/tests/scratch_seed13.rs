mod common;

use mmbx_core::ci::{CiBackend, OracleBackend};
use mmbx_core::local::{learn_skeleton, orient_v_structures, select_pivot_info};
use mmbx_core::mmb::tc_mmb;

#[test]
fn replay_seed13() {
    let inst = common::random_instance(13, 3);
    let mag = inst.mag.clone();
    let g = mag.graph();
    let names: Vec<String> = g.names().to_vec();
    let id = |s: &str| names.iter().position(|n| n == s).unwrap();
    let mut b = OracleBackend::from_mag(mag.clone());
    let obs: Vec<usize> = (0..b.num_vars()).collect();

    for pivot_name in ["X3", "X2"] {
        let x = id(pivot_name);
        let r = tc_mmb(&mut b, &obs, x).unwrap();
        println!(
            "pivot {pivot_name}: MMB = {:?}",
            r.mmb.iter().map(|&v| &names[v]).collect::<Vec<_>>()
        );
        let scope: Vec<usize> = r.mmb_plus.iter().copied().collect();
        let ls = orient_v_structures(learn_skeleton(&mut b, &scope).unwrap(), &mut b).unwrap();
        println!(
            "  vstructs: {:?}",
            ls.vstructs
                .iter()
                .map(|&(a, c, bb)| format!("{}*->{}<-*{}", names[a], names[c], names[bb]))
                .collect::<Vec<_>>()
        );
        for (&(p, q), sep) in &ls.sepsets {
            println!(
                "  sepset ({}, {}) = {:?}",
                names[p],
                names[q],
                sep.iter().map(|&v| &names[v]).collect::<Vec<_>>()
            );
        }
        let sel = select_pivot_info(&ls, x).unwrap();
        for (a, bb, ma, mb) in &sel.edges {
            println!("  select {}[{ma:?}] - [{mb:?}]{}", names[*a], names[*bb]);
        }
    }
}
