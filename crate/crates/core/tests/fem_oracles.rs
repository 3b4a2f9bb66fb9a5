//! Finite-element checks against independent oracles: numerical quadrature
//! of the element stiffness, dense direct solves of small assembled systems
//! and central finite differences.

mod common;

use common::{cantilever, dense_compliance, dofs_of, hex_oracle, quad_oracle, E_MIN};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selfsupport::fem::{
    compliance_sensitivity, element_stiffness, ElementStiffness, FeSolver, LoadCase, Preconditioner,
    SolverOptions,
};
use selfsupport::grid::{DensityField, GridDims};

fn as_matrix(ke: &ElementStiffness) -> DMatrix<f64> {
    DMatrix::from_row_slice(ke.size(), ke.size(), ke.as_slice())
}

#[test]
fn quad_stiffness_matches_quadrature() {
    for (e, nu) in [(1.0, 0.3), (2.0, 0.3), (1.0, 0.0), (3.5, 0.45)] {
        let ke = as_matrix(&element_stiffness(2, e, nu).unwrap());
        let oracle = quad_oracle(e, nu);
        let err = (&ke - &oracle).abs().max();
        assert!(err < 1e-12 * e, "E={e} nu={nu}: max error {err:e}");
    }
}

#[test]
fn hex_stiffness_matches_quadrature() {
    for (e, nu) in [(1.0, 0.3), (2.0, 0.1)] {
        let ke = as_matrix(&element_stiffness(3, e, nu).unwrap());
        let err = (&ke - hex_oracle(e, nu)).abs().max();
        assert!(err < 1e-12 * e, "E={e} nu={nu}: max error {err:e}");
    }
}

#[test]
fn stiffness_symmetric_with_rigid_modes() {
    for dim in [2, 3] {
        let ke = as_matrix(&element_stiffness(dim, 1.0, 0.3).unwrap());
        assert!((&ke - ke.transpose()).abs().max() < 1e-15);
        let nodes = ke.nrows() / dim;
        for c in 0..dim {
            let t = DVector::from_fn(ke.nrows(), |i, _| if i % dim == c { 1.0 } else { 0.0 });
            assert!((&ke * t).abs().max() < 1e-14, "translation {c} of {nodes}-node element");
        }
        let eig = ke.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&v| v > -1e-12));
    }
}

fn random_field(d: GridDims, lo: f64, seed: u64) -> DensityField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..d.len()).map(|_| rng.random_range(lo..=1.0)).collect();
    DensityField::from_values(d, v).unwrap()
}

fn tight(pre: Preconditioner) -> SolverOptions {
    SolverOptions { tolerance: 1e-13, max_iterations: None, preconditioner: pre }
}

#[test]
fn cantilever_4x4_matches_dense_lu() {
    let d = GridDims::new_2d(4, 4).unwrap();
    let ke = element_stiffness(2, 1.0, 0.3).unwrap();
    let lc = cantilever(d);
    for seed in 0..5 {
        let f = random_field(d, 0.2, seed);
        let (c_ref, u_ref) = dense_compliance(&f, 3.0, &lc, &as_matrix(&ke));
        for pre in [Preconditioner::Multigrid, Preconditioner::Jacobi] {
            let opts = SolverOptions { preconditioner: pre, ..SolverOptions::default() };
            let st = FeSolver::new(d, ke.clone(), &lc, opts).unwrap().solve(&f, 3.0).unwrap();
            let rel = (st.compliance - c_ref).abs() / c_ref;
            assert!(rel < 1e-8, "seed {seed} {pre:?}: rel {rel:e}");
            let du = st.displacements.iter().zip(&u_ref).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let umax = u_ref.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(du < 1e-6 * umax);
        }
    }
}

#[test]
fn small_3d_matches_dense_lu() {
    let d = GridDims::new(3, 2, 2).unwrap();
    let ke = element_stiffness(3, 1.0, 0.3).unwrap();
    let lc = cantilever(d);
    let f = random_field(d, 0.3, 7);
    let (c_ref, _) = dense_compliance(&f, 3.0, &lc, &as_matrix(&ke));
    let st = FeSolver::new(d, ke, &lc, SolverOptions::default()).unwrap().solve(&f, 3.0).unwrap();
    assert!((st.compliance - c_ref).abs() / c_ref < 1e-8);
}

#[test]
fn energy_identity_and_zero_load() {
    let d = GridDims::new_2d(8, 5).unwrap();
    let ke = element_stiffness(2, 1.0, 0.3).unwrap();
    let lc = cantilever(d);
    let f = random_field(d, 0.1, 3);
    let st = FeSolver::new(d, ke.clone(), &lc, tight(Preconditioner::Multigrid)).unwrap().solve(&f, 3.0).unwrap();
    // u^T K u from element energies
    let energy: f64 = (0..d.len())
        .map(|e| {
            let ue: Vec<f64> = dofs_of(d, e).iter().map(|&g| st.displacements[g]).collect();
            (E_MIN + f.get(e).powi(3) * (1.0 - E_MIN)) * ke.energy(&ue)
        })
        .sum();
    assert!((energy - st.compliance).abs() < 1e-9 * st.compliance);
    for &g in &lc.fixed_dofs {
        assert_eq!(st.displacements[g], 0.0);
    }

    let mut free = LoadCase::default();
    free.fixed_dofs = lc.fixed_dofs.clone();
    let st0 = FeSolver::new(d, ke.clone(), &free, SolverOptions::default()).unwrap().solve(&f, 3.0).unwrap();
    assert_eq!(st0.compliance, 0.0);
    assert!(compliance_sensitivity(&f, 3.0, &st0, &ke).iter().all(|&g| g == 0.0));
}

fn compliance_of(d: GridDims, lc: &LoadCase, ke: &ElementStiffness, v: &[f64]) -> f64 {
    let f = DensityField::from_values(d, v.to_vec()).unwrap();
    FeSolver::new(d, ke.clone(), lc, tight(Preconditioner::Multigrid)).unwrap().solve(&f, 3.0).unwrap().compliance
}

#[test]
fn compliance_sensitivity_matches_finite_differences() {
    let h = 1e-6;
    for (d, seed) in [(GridDims::new_2d(6, 4).unwrap(), 11), (GridDims::new_2d(4, 4).unwrap(), 12)] {
        let ke = element_stiffness(2, 1.0, 0.3).unwrap();
        let lc = cantilever(d);
        let f = random_field(d, 0.2, seed);
        let st = FeSolver::new(d, ke.clone(), &lc, tight(Preconditioner::Multigrid)).unwrap().solve(&f, 3.0).unwrap();
        let g = compliance_sensitivity(&f, 3.0, &st, &ke);
        for e in 0..d.len() {
            let mut v = f.values().to_vec();
            v[e] += h;
            let cp = compliance_of(d, &lc, &ke, &v);
            v[e] -= 2.0 * h;
            let cm = compliance_of(d, &lc, &ke, &v);
            let fd = (cp - cm) / (2.0 * h);
            let rel = (g[e] - fd).abs() / fd.abs().max(1e-12);
            assert!(rel < 1e-4, "{d} element {e}: analytic {} fd {fd} rel {rel:e}", g[e]);
            assert!(g[e] <= 0.0);
        }
    }
}

#[test]
fn p1_uniform_sensitivity_is_minus_element_energy() {
    let d = GridDims::new_2d(5, 3).unwrap();
    let ke = element_stiffness(2, 1.0, 0.3).unwrap();
    let lc = cantilever(d);
    let f = DensityField::uniform(d, 1.0);
    let st = FeSolver::new(d, ke.clone(), &lc, tight(Preconditioner::Jacobi)).unwrap().solve(&f, 1.0).unwrap();
    let g = compliance_sensitivity(&f, 1.0, &st, &ke);
    for e in 0..d.len() {
        let ue: Vec<f64> = dofs_of(d, e).iter().map(|&q| st.displacements[q]).collect();
        let w = ke.energy(&ue);
        assert!((g[e] + (1.0 - E_MIN) * w).abs() <= 1e-12 * w.max(1e-30));
    }
}

#[test]
fn adding_material_never_raises_compliance() {
    let d = GridDims::new_2d(6, 4).unwrap();
    let ke = element_stiffness(2, 1.0, 0.3).unwrap();
    let lc = cantilever(d);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let f = random_field(d, 0.1, 5);
    let c0 = compliance_of(d, &lc, &ke, f.values());
    for _ in 0..20 {
        let e = rng.random_range(0..d.len());
        let mut v = f.values().to_vec();
        v[e] = (v[e] + rng.random_range(0.01..0.5)).min(1.0);
        assert!(compliance_of(d, &lc, &ke, &v) <= c0 * (1.0 + 1e-10));
    }
}
