//! Property tests over random Hamiltonians, states and generators. Matrix
//! inputs are drawn from a seeded generator so shrinking acts on the seed.

use num_complex::Complex64;
use proptest::prelude::*;

use downfold::cluster_analysis::{build_projectors, cluster_analyze, determinant_vector, split_amplitudes};
use downfold::downfolding::{downfold_ducc, downfold_sescc, unitary_transform};
use downfold::dynamics::{build_heff_td, dexp_series};
use downfold::fock_space::{build_basis, sector_size, Determinant, SpinOrbitalPartition};
use downfold::imaginary_time::{imaginary_evolve, Stepper};
use downfold::operators::matfn::{
    anti_hermiticity_defect, expm_matrix, hermitian_eigen, hermiticity_defect, logm_unitary_matrix, unitarity_defect,
};
use downfold::operators::{commutator_matrix, hamiltonian_from_integrals, CMatrix, CVector};
use downfold::random::{
    random_amplitudes, random_anti_hermitian, random_hermitian, random_integrals, random_unit_vector, seeded,
};
use downfold::sweeps::{decompose, SweepOrdering};

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `(M, N, n_occ_active, n_virt_active)` with at least one internal excitation.
fn arb_space() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    prop_oneof![Just((4, 2, 1, 1)), Just((6, 2, 1, 2)), Just((6, 3, 2, 2)), Just((6, 3, 1, 1)), Just((8, 4, 2, 2))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ladder_operators_anticommute(m in 2usize..=8, occ in any::<u16>(), p in 0usize..8, q in 0usize..8) {
        prop_assume!(p < m && q < m);
        let d = Determinant::new(u32::from(occ) & ((1 << m) - 1), m).unwrap();
        // {a_p, a†_q} acting on |d⟩
        let ac = d.create(q).and_then(|(x, s)| x.annihilate(p).map(|(y, t)| (y, s * t)));
        let ca = d.annihilate(p).and_then(|(x, s)| x.create(q).map(|(y, t)| (y, s * t)));
        if p == q {
            let sum: f64 = [ac, ca].iter().flatten().map(|(y, s)| {
                assert_eq!(*y, d);
                *s
            }).sum();
            prop_assert_eq!(sum, 1.0);
        } else {
            match (ac, ca) {
                (Some((x, s)), Some((y, t))) => {
                    prop_assert_eq!(x, y);
                    prop_assert_eq!(s + t, 0.0);
                }
                (a, b) => prop_assert!(a.is_none() && b.is_none()),
            }
        }
    }

    #[test]
    fn basis_has_binomial_size(m in 1usize..=12, n in 0usize..=12) {
        prop_assume!(n <= m);
        let basis = build_basis(m, n).unwrap();
        prop_assert_eq!(basis.len(), sector_size(m, n));
        for (i, &d) in basis.determinants().iter().enumerate() {
            prop_assert_eq!(basis.index_of(d), Some(i));
            prop_assert_eq!(d.n_electrons(), n);
        }
    }

    #[test]
    fn hamiltonians_are_hermitian(seed in any::<u64>(), (m, n, _, _) in arb_space()) {
        let basis = build_basis(m, n).unwrap();
        let h = hamiltonian_from_integrals(&random_integrals(&mut seeded(seed), m, n, 1.0, 1.0), &basis).unwrap();
        prop_assert!(hermiticity_defect(h.matrix()) < 1e-12);
    }

    #[test]
    fn log_inverts_exp_for_unitaries(seed in any::<u64>(), n in 1usize..12, scale in 0.0f64..1.0) {
        let x = random_anti_hermitian(&mut seeded(seed), n, scale);
        let u = expm_matrix(&x).unwrap();
        prop_assert!(unitarity_defect(&u) < 1e-12);
        let l = logm_unitary_matrix(&u).unwrap();
        prop_assert!(anti_hermiticity_defect(&l) < 1e-12);
        prop_assert!((expm_matrix(&l).unwrap() - u).norm() < 1e-11);
    }

    #[test]
    fn cluster_round_trip(seed in any::<u64>(), (m, n, _, _) in arb_space()) {
        let mut rng = seeded(seed);
        let basis = build_basis(m, n).unwrap();
        let reference = basis.aufbau_reference();
        let phi = determinant_vector(&basis, reference).unwrap();
        let psi = &phi * c(2.0) + random_unit_vector(&mut rng, basis.len());
        let t = cluster_analyze(&psi, reference, &basis).unwrap();
        let r = basis.index_of(reference).unwrap();
        prop_assert!((t.apply_exp(&phi, &basis) - &psi / psi[r]).norm() < 1e-10);
    }

    #[test]
    fn sweeps_reconstruct_random_states(seed in any::<u64>(), (m, n, no, nv) in arb_space()) {
        let mut rng = seeded(seed);
        let basis = build_basis(m, n).unwrap();
        let part = SpinOrbitalPartition::auto_homo_lumo(m, n, no, nv).unwrap();
        let phi = determinant_vector(&basis, part.reference()).unwrap();
        let psi = &phi * c(1.5) + random_unit_vector(&mut rng, basis.len());
        let psi = &psi / c(psi.norm());
        let r = decompose(&psi, &part, &basis, SweepOrdering::default()).unwrap();
        prop_assert!(r.residual < 1e-10);
        prop_assert!(r.max_regrowth < 1e-10);
        prop_assert!(unitarity_defect(r.omega12.matrix()) < 1e-12);
        prop_assert!(anti_hermiticity_defect(r.sigma_ext.matrix()) < 1e-10);
        prop_assert!(anti_hermiticity_defect(r.sigma_int.matrix()) < 1e-10);
        let proj = build_projectors(part.reference(), &basis, &part).unwrap();
        prop_assert!(proj.external_norm(&r.psi_act) < 1e-12);
    }

    #[test]
    fn downfolded_spectrum_contains_ground_energy(seed in any::<u64>(), (m, n, no, nv) in arb_space()) {
        let mut rng = seeded(seed);
        let basis = build_basis(m, n).unwrap();
        let h = hamiltonian_from_integrals(&random_integrals(&mut rng, m, n, 0.3, 0.2), &basis).unwrap();
        let (e, v) = hermitian_eigen(h.matrix()).unwrap();
        let part = SpinOrbitalPartition::auto_homo_lumo(m, n, no, nv).unwrap();
        let proj = build_projectors(part.reference(), &basis, &part).unwrap();
        let psi = v.column(0).into_owned();
        let sweep = decompose(&psi, &part, &basis, SweepOrdering::default()).unwrap();
        let heff = downfold_ducc(&h, &sweep.sigma_ext, &proj, &basis).unwrap();
        prop_assert!((hermitian_eigen(&heff.matrix).unwrap().0[0] - e[0]).abs() < 1e-9);
        let t = cluster_analyze(&psi, part.reference(), &basis).unwrap();
        let (_, t_ext) = split_amplitudes(&t, &part);
        let sescc = downfold_sescc(&h, &t_ext, &proj, &basis).unwrap();
        let (vals, _) = downfold::operators::matfn::general_eigen(&sescc.matrix).unwrap();
        let closest = vals.iter().map(|z| (z - c(e[0])).norm()).fold(f64::INFINITY, f64::min);
        prop_assert!(closest < 1e-9);
    }

    #[test]
    fn similarity_transform_preserves_spectrum(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = seeded(seed);
        let h = random_hermitian(&mut rng, n, 1.0);
        let s = random_anti_hermitian(&mut rng, n, 1.0);
        let hbar = unitary_transform(&h, &s).unwrap();
        let (a, _) = hermitian_eigen(&h).unwrap();
        let (b, _) = hermitian_eigen(&hbar).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn dexp_is_anti_hermitian_for_every_order(seed in any::<u64>(), n in 1usize..10, k in 0usize..20) {
        let mut rng = seeded(seed);
        let x = random_anti_hermitian(&mut rng, n, 1.0);
        let xd = random_anti_hermitian(&mut rng, n, 1.0);
        prop_assert!(anti_hermiticity_defect(&dexp_series(&x, &xd, k).a) < 1e-12);
    }

    #[test]
    fn heff_td_is_hermitian(seed in any::<u64>(), (m, n, no, nv) in arb_space()) {
        let mut rng = seeded(seed);
        let basis = build_basis(m, n).unwrap();
        let h = hamiltonian_from_integrals(&random_integrals(&mut rng, m, n, 0.3, 0.2), &basis).unwrap();
        let part = SpinOrbitalPartition::auto_homo_lumo(m, n, no, nv).unwrap();
        let proj = build_projectors(part.reference(), &basis, &part).unwrap();
        let s = random_anti_hermitian(&mut rng, basis.len(), 0.5);
        let sd = random_anti_hermitian(&mut rng, basis.len(), 0.5);
        let heff = build_heff_td(&h, &s, &sd, &proj, &basis, 12).unwrap();
        let raw = proj.restrict_matrix(&(unitary_transform(h.matrix(), &s).unwrap()
            - dexp_series(&s, &sd, 12).a * Complex64::new(0.0, 1.0)));
        prop_assert!(hermiticity_defect(&raw) < 1e-10);
        prop_assert!((heff.matrix - raw).norm() < 1e-10);
    }

    #[test]
    fn external_velocity_has_no_cas_component(seed in any::<u64>(), (m, n, no, nv) in arb_space()) {
        let mut rng = seeded(seed);
        let basis = build_basis(m, n).unwrap();
        let part = SpinOrbitalPartition::auto_homo_lumo(m, n, no, nv).unwrap();
        let proj = build_projectors(part.reference(), &basis, &part).unwrap();
        let r = part.reference();
        let (t_int, _) = split_amplitudes(&random_amplitudes(&mut rng, r, &basis, 0.5, |_| true), &part);
        let (_, td_ext) = split_amplitudes(&random_amplitudes(&mut rng, r, &basis, 0.5, |_| true), &part);
        let phi = determinant_vector(&basis, r).unwrap();
        let v = td_ext.excitation_matrix(&basis).unwrap() * t_int.apply_exp(&phi, &basis);
        prop_assert!(proj.restrict(&v).norm() < 1e-14);
    }

    #[test]
    fn excitation_matrices_commute(seed in any::<u64>(), (m, n, no, nv) in arb_space()) {
        let mut rng = seeded(seed);
        let basis = build_basis(m, n).unwrap();
        let part = SpinOrbitalPartition::auto_homo_lumo(m, n, no, nv).unwrap();
        let r = part.reference();
        let (ti, te) = split_amplitudes(&random_amplitudes(&mut rng, r, &basis, 0.5, |_| true), &part);
        let a = ti.excitation_matrix(&basis).unwrap();
        let b = te.excitation_matrix(&basis).unwrap();
        prop_assert!(commutator_matrix(&a, &b).norm() < 1e-14);
        let t = &a + &b;
        let nn = basis.len();
        prop_assert!((expm_matrix(&(-&t)).unwrap() * expm_matrix(&t).unwrap() - CMatrix::identity(nn, nn)).norm() < 1e-12);
    }

    #[test]
    fn imaginary_flow_descends_within_spectrum(seed in any::<u64>(), n in 2usize..8, dtau in 0.01f64..0.5) {
        let mut rng = seeded(seed);
        let h = random_hermitian(&mut rng, n, 1.0);
        let (e, _) = hermitian_eigen(&h).unwrap();
        let c0: CVector = random_unit_vector(&mut rng, n);
        if let Ok(r) = imaginary_evolve(&h, &c0, dtau, 1e-11, 20_000, Stepper::ExponentialEuler) {
            for w in r.state.energy_history.windows(2) {
                prop_assert!(w[1].1 <= w[0].1 + 1e-12);
            }
            for &(_, s) in &r.state.energy_history {
                prop_assert!(s >= e[0] - 1e-12 && s <= e[n - 1] + 1e-12);
            }
        }
    }
}
