use nalgebra::Matrix4;
use qdcascade::kinetics::{integrate_populations, PopulationVector};
use qdcascade::levels::{build_rate_catalog, Level, QdParams};
use qdcascade::linalg::{hermiticity_defect, min_eigenvalue, vectorize};
use qdcascade::ode::Tolerances;
use qdcascade::qdynamics::*;
use qdcascade::{C64, HBAR};

fn liouvillian(p: &QdParams, t: f64) -> Liouvillian {
    build_liouvillian(p, &build_rate_catalog(p, t).unwrap()).unwrap()
}

fn correlators(p: &QdParams, t: f64, pulse: PulseModel, grid: CorrelatorGrid) -> CorrelatorSet {
    let prep = prepare_initial(&pulse, &liouvillian(p, t)).unwrap();
    two_time_correlators(&prep.rho0, &prep.liouvillian, &grid).unwrap()
}

const COLD: f64 = 0.5;

#[test]
fn jump_set_at_43k() {
    let l = liouvillian(&QdParams::default(), 43.0);
    let j = l.jumps.iter().find(|j| j.source == Level::XH && j.target == Level::XStar).unwrap();
    assert!((j.rate - 2.33).abs() < 5e-3);
    for j in &l.jumps {
        let op = j.operator();
        assert_eq!(op.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }
}

#[test]
fn cold_generator_reduces_to_ideal_cascade() {
    let p = QdParams::default();
    let l = liouvillian(&p, COLD);
    let ideal = Liouvillian::new(
        COLD,
        l.energies,
        vec![
            Jump { source: Level::XX, target: Level::XH, rate: p.gamma_xx / 2.0 },
            Jump { source: Level::XX, target: Level::XV, rate: p.gamma_xx / 2.0 },
            Jump { source: Level::XH, target: Level::G, rate: p.gamma_x },
            Jump { source: Level::XV, target: Level::G, rate: p.gamma_x },
        ],
    );
    let sub = [Level::G, Level::XH, Level::XV, Level::XX].map(|l| l.index());
    let vec_idx: Vec<usize> = sub.iter().flat_map(|&b| sub.iter().map(move |&a| a + 7 * b)).collect();
    for &r in &vec_idx {
        for &c in &vec_idx {
            let d = (l.superoperator()[(r, c)] - ideal.superoperator()[(r, c)]).norm();
            assert!(d < 1e-12, "({r}, {c}): {d:e}");
        }
    }
}

#[test]
fn trace_preservation_of_dual() {
    for t in [COLD, 20.0, 70.0] {
        let p = QdParams { fss: 3.0, dephasing_rate: 0.2, ..QdParams::default() };
        let l = liouvillian(&p, t);
        let id = vectorize(&Op7::identity());
        let dual = l.superoperator().adjoint() * id;
        assert!(dual.iter().all(|z| z.norm() < 1e-12));
    }
}

#[test]
fn ground_state_is_absorbing() {
    let l = liouvillian(&QdParams::default(), 60.0);
    let g = DensityOperator::pure(Level::G);
    for t in [0.1, 1.0, 12.5] {
        let r = propagate(&g, &l, t).unwrap();
        assert!((r.0 - g.0).iter().all(|z| z.norm() < 1e-12));
    }
}

#[test]
fn cold_cascade_completes() {
    let l = liouvillian(&QdParams::default(), COLD);
    let r = propagate(&DensityOperator::pure(Level::XX), &l, 10.0).unwrap();
    assert!(r.population(Level::G) > 1.0 - 1e-4);
}

#[test]
fn states_stay_physical() {
    let p = QdParams { fss: 2.0, dephasing_rate: 0.5, ..QdParams::default() };
    let prep = prepare_initial(&PulseModel::stark_default(), &liouvillian(&p, 45.0)).unwrap();
    for i in 0..40 {
        let t = 0.0025 * i as f64 * i as f64;
        let r = propagate(&prep.rho0, &prep.liouvillian, t).unwrap();
        r.validate().unwrap();
    }
}

#[test]
fn lindblad_populations_match_rate_equations() {
    let p = QdParams::default();
    let mut init = PopulationVector::pure(Level::XX);
    init.0[Level::XX.index()] = 0.7;
    init.0[Level::XH.index()] = 0.1;
    init.0[Level::XStar.index()] = 0.2;
    let rho0 = DensityOperator(Op7::from_diagonal(&init.0.map(C64::from)));
    for t in [4.4, 32.4, 64.4] {
        let c = build_rate_catalog(&p, t).unwrap();
        let l = build_liouvillian(&p, &c).unwrap();
        let series = integrate_populations(&c, &init, 6.0, 0.25, Tolerances { rtol: 1e-12, atol: 1e-15 }).unwrap();
        for (i, pop) in series.states.iter().enumerate() {
            let r = propagate(&rho0, &l, i as f64 * series.dt).unwrap();
            for lv in Level::ALL {
                let d = (r.population(lv) - pop.get(lv)).abs();
                assert!(d < 1e-8, "T = {t}, step {i}, {lv}: {d:e}");
            }
        }
    }
}

/// Closed-form correlator of the ideal four-level cascade with splitting
/// `fss`: `G(t, τ) = e^{-γ_XX t} e^{-γ_X τ}` times the phase of the
/// `X_V`–`X_H` coherence for the cross terms.
fn cascade_oracle(p: &QdParams, idx: [Pol; 4], t: f64, tau: f64) -> C64 {
    let [j, k, l, m] = idx;
    if j != k || l != m {
        return C64::from(0.0);
    }
    let base = (-p.gamma_xx * t - p.gamma_x * tau).exp();
    let e = |q: Pol| if q == Pol::H { 0.5 * p.fss } else { -0.5 * p.fss };
    // sandwich |X_l⟩⟨X_j| rotates at (E_j − E_l)/ħ
    C64::from_polar(base, (e(j) - e(l)) * tau / HBAR)
}

#[test]
fn correlators_match_four_level_oracle() {
    for fss in [0.0, 2.849, 7.5] {
        let p = QdParams { fss, ..QdParams::default() };
        let set = correlators(&p, COLD, PulseModel::Instantaneous, CorrelatorGrid { tau_max: 3.0, ..Default::default() });
        for &(it, iq) in &[(0usize, 0usize), (10, 250), (300, 17), (800, 1200), (1500, 2999)] {
            for j in Pol::BOTH {
                for k in Pol::BOTH {
                    for l in Pol::BOTH {
                        for m in Pol::BOTH {
                            let g = set.value([j, k, l, m], it, iq);
                            let o = cascade_oracle(&p, [j, k, l, m], set.t(it), set.tau(iq));
                            let scale = (-p.gamma_xx * set.t(it)).exp();
                            assert!((g - o).norm() < 1e-9 * scale, "fss {fss}, {:?} at ({it},{iq}): {g} vs {o}", [j, k, l, m]);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn ideal_cascade_is_symmetric_and_coherent() {
    let set = correlators(&QdParams::default(), COLD, PulseModel::Instantaneous, CorrelatorGrid { tau_max: 2.0, ..Default::default() });
    use Pol::{H, V};
    for it in (0..set.n_t()).step_by(97) {
        for iq in (0..set.n_tau()).step_by(131) {
            let hh = set.correlator(H, H, H, H).value(it, iq);
            assert!((hh - set.correlator(V, V, V, V).value(it, iq)).norm() < 1e-12);
            assert!((hh - set.correlator(H, H, V, V).value(it, iq)).norm() < 1e-12);
        }
    }
}

fn check_physical_matrix(m: &Matrix4<C64>) {
    let scale = m.trace().re.max(1e-300);
    assert!(hermiticity_defect(m) < 1e-12 * scale.max(1.0));
    assert!(min_eigenvalue(m) > -1e-10 * scale.max(1.0));
}

#[test]
fn correlator_matrices_are_positive() {
    let p = QdParams { fss: 1.7, dephasing_rate: 0.4, ..QdParams::default() };
    let set = correlators(&p, 41.0, PulseModel::stark_default(), CorrelatorGrid { tau_max: 4.0, ..Default::default() });
    for it in [0, 3, 11, 29, 30, 31, 200, 900] {
        for iq in [0, 1, 5, 29, 30, 44, 700, 3999] {
            let m = set.matrix_at(it, iq);
            check_physical_matrix(&m);
            for a in 0..4 {
                assert!(m[(a, a)].re >= -1e-12 && m[(a, a)].im.abs() < 1e-12);
            }
        }
    }
}

#[test]
fn zero_shift_pulse_equals_instantaneous() {
    let p = QdParams { fss: 1.0, ..QdParams::default() };
    let grid = CorrelatorGrid { tau_max: 2.0, ..Default::default() };
    let a = correlators(&p, 20.0, PulseModel::Instantaneous, grid);
    let b = correlators(&p, 20.0, PulseModel::StarkGaussian { fwhm: 10.0, s_max: 0.0, level: Level::XH }, grid);
    let (ma, mb) = (a.integrate(0.0, 2.0).unwrap(), b.integrate(0.0, 2.0).unwrap());
    assert!((ma - mb).norm() == 0.0);
}

#[test]
fn bin_integrals_are_additive() {
    let p = QdParams { fss: 2.0, ..QdParams::default() };
    let set = correlators(&p, 25.0, PulseModel::stark_default(), CorrelatorGrid { tau_max: 3.0, ..Default::default() });
    for (a, b, c) in [(0.0, 0.0123, 0.5), (0.1, 0.75, 1.1), (0.0004, 1.5, 3.0)] {
        let whole = set.integrate(a, c).unwrap();
        let parts = set.integrate(a, b).unwrap() + set.integrate(b, c).unwrap();
        assert!((whole - parts).norm() < 1e-13 * whole.norm());
    }
}

#[test]
fn halving_the_grid_step_is_converged() {
    let p = QdParams { fss: 1.5, ..QdParams::default() };
    for pulse in [PulseModel::Instantaneous, PulseModel::stark_default()] {
        let coarse = correlators(&p, 30.0, pulse, CorrelatorGrid { tau_max: 2.0, ..Default::default() });
        let fine = correlators(&p, 30.0, pulse, CorrelatorGrid { dt: 5e-4, tau_max: 2.0, ..Default::default() });
        for (lo, hi) in [(0.0, 2.0), (0.25, 0.75)] {
            let (a, b) = (coarse.integrate(lo, hi).unwrap(), fine.integrate(lo, hi).unwrap());
            let rel = (a - b).norm() / b.norm();
            assert!(rel < 1e-5, "{pulse:?} [{lo}, {hi}]: {rel:e}");
        }
    }
}

#[test]
fn coarse_grid_rejected() {
    let p = QdParams { fss: 50.0, ..QdParams::default() };
    let l = liouvillian(&p, 10.0);
    let r = two_time_correlators(&DensityOperator::pure(Level::XX), &l, &CorrelatorGrid { dt: 0.05, ..Default::default() });
    assert!(matches!(r, Err(DynamicsError::GridTooCoarse { .. })));
}

#[test]
fn invalid_inputs_rejected() {
    let l = liouvillian(&QdParams::default(), 10.0);
    let mut bad = DensityOperator::pure(Level::XX);
    bad.0[(0, 0)] = C64::from(0.5);
    assert!(propagate(&bad, &l, 1.0).is_err());
    assert!(propagate(&DensityOperator::pure(Level::XX), &l, -1.0).is_err());
    let pulse = PulseModel::StarkGaussian { fwhm: -1.0, s_max: 10.0, level: Level::XH };
    assert!(prepare_initial(&pulse, &l).is_err());
    let pulse = PulseModel::StarkGaussian { fwhm: 10.0, s_max: 10.0, level: Level::XD };
    assert!(prepare_initial(&pulse, &l).is_err());
}

#[test]
fn correlator_csv_has_expected_columns() {
    let set = correlators(&QdParams::default(), 10.0, PulseModel::Instantaneous, CorrelatorGrid { tau_max: 0.5, ..Default::default() });
    let mut buf = Vec::new();
    set.write_csv(&mut buf, 100).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "j,k,l,m,t,tau,re,im");
    assert!(text.lines().count() > 16);
}
