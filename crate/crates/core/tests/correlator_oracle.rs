mod common;

use hrg_core::correlator::{Correlator, InteractionSpec};
use hrg_core::rg::{Grid, RGParams};
use hrg_core::tree::Window;

const TOL: f64 = 1e-6;

fn compare(p: u32, d: usize, grid: Grid, couplings: &[(f64, f64)], nodes: usize, half_width: f64) {
    let params = RGParams::new(p, d, 0.1).unwrap();
    let window = Window::new(p, d, 1).unwrap();
    let mut spec = InteractionSpec::uniform(couplings[0].0, couplings[0].1);
    for (leaf, &(g, mu)) in couplings.iter().enumerate().skip(1) {
        if (g, mu) != couplings[0] {
            spec = spec.with_local(leaf, g, mu);
        }
    }
    let corr = Correlator::new(window, params, grid, &spec).unwrap();
    let obs = vec![vec![0, 0], vec![0, 1], vec![1, 2], vec![0, 0, 1, 1], vec![0, 1, 2, 0]];
    let brute = common::single_block(&params, couplings, &obs, nodes, half_width);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    assert!(
        (corr.log_partition() - brute.log_z).abs() < TOL,
        "log Z: {} vs {}",
        corr.log_partition(),
        brute.log_z
    );
    for (o, want) in obs.iter().zip(&brute.moments) {
        let pts: Vec<_> = o.iter().map(|&i| window.leaf_point(i)).collect();
        let got = corr.moment(&pts).unwrap();
        assert!(rel(got, *want) < TOL, "p={p} d={d} {o:?}: {got} vs {want}");
    }
}

#[test]
fn three_leaves_uniform() {
    compare(3, 1, Grid::new(513, 40.0).unwrap(), &[(0.05, 0.02); 3], 81, 8.0);
}

#[test]
fn three_leaves_local() {
    compare(3, 1, Grid::new(513, 40.0).unwrap(), &[(0.05, 0.02), (0.3, -0.1), (0.05, 0.02)], 81, 8.0);
}

#[test]
fn four_leaves_local() {
    compare(2, 2, Grid::new(513, 40.0).unwrap(), &[(0.1, 0.0), (0.1, 0.0), (0.02, 0.1), (0.4, -0.2)], 81, 8.0);
}
