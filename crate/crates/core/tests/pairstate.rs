use nalgebra::{DMatrix, Matrix2, Matrix4, Vector4};
use proptest::prelude::*;
use qdcascade::levels::{build_rate_catalog, Level, QdParams};
use qdcascade::pairstate::*;
use qdcascade::qdynamics::*;
use qdcascade::{C64, HBAR};

const COLD: f64 = 0.5;

fn matrix(p: &QdParams, t: f64, pulse: PulseModel, bin: TimeBin) -> TwoPhotonMatrix {
    let l = build_liouvillian(p, &build_rate_catalog(p, t).unwrap()).unwrap();
    let prep = prepare_initial(&pulse, &l).unwrap();
    let set = two_time_correlators(&prep.rho0, &prep.liouvillian, &CorrelatorGrid::default()).unwrap();
    assemble_two_photon_matrix(&set, &bin).unwrap()
}

/// Wootters concurrence from the eigenvalues of the non-Hermitian `ρ ρ̃`,
/// found through the real 8×8 embedding of the complex matrix.
fn wootters_brute_force(rho: &Matrix4<C64>) -> f64 {
    let yy = Matrix4::from_fn(|r, c| match (r, c) {
        (0, 3) | (3, 0) => C64::from(-1.0),
        (1, 2) | (2, 1) => C64::from(1.0),
        _ => C64::from(0.0),
    });
    let r = rho * yy * rho.conjugate() * yy;
    let emb = DMatrix::from_fn(8, 8, |i, j| {
        let z = r[(i % 4, j % 4)];
        match (i / 4, j / 4) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    });
    let mut ev: Vec<f64> = emb.complex_eigenvalues().iter().map(|z| z.re.max(0.0).sqrt()).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    // each eigenvalue appears twice in the embedding
    let l: Vec<f64> = ev.iter().step_by(2).copied().collect();
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

#[test]
fn ideal_cascade_gives_phi_plus() {
    let rho = matrix(&QdParams::default(), COLD, PulseModel::Instantaneous, TimeBin::starting_at(0.0, 2.0).unwrap());
    let target = TwoPhotonMatrix::bell(Bell::PhiPlus);
    assert!((rho.0 - target.0).iter().all(|z| z.norm() < 1e-6));
    assert!((concurrence(&rho).unwrap() - 1.0).abs() < 1e-4);
    assert!((fidelity_to_bell(&rho, Bell::PhiPlus) - 1.0).abs() < 1e-6);
}

/// Closed-form matrix element `ρ_{HH,VV}` of the cold four-level cascade
/// with splitting `fss`, for delays in `[lo, hi]`.
fn fss_oracle(p: &QdParams, lo: f64, hi: f64) -> C64 {
    let w = C64::new(p.gamma_x, -p.fss / HBAR);
    let num = ((-w * lo).exp() - (-w * hi).exp()) / w;
    let den = ((-p.gamma_x * lo).exp() - (-p.gamma_x * hi).exp()) / p.gamma_x;
    num / den * 0.5
}

#[test]
fn fine_structure_splitting_matches_closed_form() {
    let fss = HBAR * QdParams::default().gamma_x;
    let p = QdParams { fss, ..QdParams::default() };
    let full = matrix(&p, COLD, PulseModel::Instantaneous, TimeBin::full_period());
    let c = full.get(HH, VV);
    assert!((c.norm() - 0.5 / 2f64.sqrt()).abs() < 1e-3 / 2f64.sqrt());
    assert!((concurrence(&full).unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-2 / 2f64.sqrt());
    for (lo, hi) in [(0.0, 12.5), (0.0, 0.5), (0.2, 0.7), (1.0, 3.0)] {
        let bin = TimeBin::new(0.5 * (lo + hi), hi - lo).unwrap();
        let rho = matrix(&p, COLD, PulseModel::Instantaneous, bin);
        let o = fss_oracle(&p, lo, hi);
        assert!((rho.get(HH, VV) - o).norm() < 1e-5, "[{lo}, {hi}]: {} vs {o}", rho.get(HH, VV));
        assert!((rho.get(VV, HH) - o.conj()).norm() < 1e-5);
    }
}

/// Concurrence of the cold cascade when `X_H` is shifted by the Gaussian
/// pulse, from a direct quadrature of the coherence phase
/// `exp(i/ħ ∫_t^{t+τ} s)` weighted by `e^{-γ_XX t - γ_X τ}`.
fn stark_oracle(p: &QdParams, fwhm_ns: f64, s_max: f64) -> f64 {
    let (a, b) = (p.gamma_xx, p.gamma_x);
    let t_w = 3.0 * fwhm_ns;
    let n = 6000;
    let h = t_w / n as f64;
    let s = |t: f64| s_max * (-4.0 * std::f64::consts::LN_2 * (t / fwhm_ns).powi(2)).exp();
    let mut cum = vec![0.0; n + 1];
    for i in 1..=n {
        let (x0, x1) = ((i - 1) as f64 * h, i as f64 * h);
        cum[i] = cum[i - 1] + h / 6.0 * (s(x0) + 4.0 * s(0.5 * (x0 + x1)) + s(x1));
    }
    let mut extra = C64::from(0.0);
    for i in 0..=n {
        let t = i as f64 * h;
        let mut inner = C64::from(0.0);
        for k in 0..=(n - i) {
            let wk = if k == 0 || k == n - i { 0.5 } else { 1.0 };
            let phase = (cum[i + k] - cum[i]) / HBAR;
            inner += wk * h * (-b * k as f64 * h).exp() * (C64::from_polar(1.0, phase) - 1.0);
        }
        let phase_end = (cum[n] - cum[i]) / HBAR;
        inner += (C64::from_polar(1.0, phase_end) - 1.0) * (-b * (t_w - t)).exp() / b;
        let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
        extra += wi * h * (-a * t).exp() * inner;
    }
    let base = 1.0 / (a * b);
    ((C64::from(base) + extra) / base).norm()
}

#[test]
fn stark_shift_limits_concurrence() {
    let p = QdParams::default();
    let mut prev = 1.0 + 1e-12;
    for s_max in [0.0, 5.0, 20.0, 60.0] {
        let pulse = PulseModel::StarkGaussian { fwhm: 10.0, s_max, level: Level::XH };
        let c = concurrence(&matrix(&p, COLD, pulse, TimeBin::full_period())).unwrap();
        let oracle = stark_oracle(&p, 0.010, s_max);
        assert!((c - oracle).abs() < 0.02 * (1.0 - oracle) + 1e-6, "s_max {s_max}: {c} vs {oracle}");
        assert!(c < prev, "s_max {s_max}");
        prev = c;
    }
    let weak = PulseModel::StarkGaussian { fwhm: 10.0, s_max: 1e-3, level: Level::XH };
    assert!(1.0 - concurrence(&matrix(&p, COLD, weak, TimeBin::full_period())).unwrap() < 1e-6);
    let c = concurrence(&matrix(&p, COLD, PulseModel::stark_default(), TimeBin::starting_at(0.0, 2.0).unwrap())).unwrap();
    assert!(c < 1.0 - 1e-5);
}

#[test]
fn late_bins_mix_the_state() {
    let p = QdParams::default();
    let l = build_liouvillian(&p, &build_rate_catalog(&p, 32.4).unwrap()).unwrap();
    let set = two_time_correlators(&DensityOperator::pure(Level::XX), &l, &CorrelatorGrid::default()).unwrap();
    let mats: Vec<TwoPhotonMatrix> = (0..8)
        .map(|i| assemble_two_photon_matrix(&set, &TimeBin::new(0.15 * i as f64, 0.5).unwrap()).unwrap())
        .collect();
    for w in mats.windows(2) {
        assert!(w[1].get(HV, HV).re >= w[0].get(HV, HV).re);
        assert!(w[1].get(VH, VH).re >= w[0].get(VH, VH).re);
        assert!(w[1].get(HH, VV).norm() <= w[0].get(HH, VV).norm());
    }
    for m in &mats {
        m.validate().unwrap();
    }
}

#[test]
fn bins_outside_grid_or_empty_rejected() {
    assert!(TimeBin::new(1.0, 0.0).is_err());
    assert!(TimeBin::new(-1.0, 0.5).is_err());
    assert!(TimeBin::new(12.4, 0.5).is_err());
    let p = QdParams::default();
    let l = build_liouvillian(&p, &build_rate_catalog(&p, 4.4).unwrap()).unwrap();
    let grid = CorrelatorGrid { tau_max: 2.0, ..Default::default() };
    let set = two_time_correlators(&DensityOperator::pure(Level::XX), &l, &grid).unwrap();
    assert!(matches!(
        assemble_two_photon_matrix(&set, &TimeBin::new(3.0, 1.0).unwrap()),
        Err(PairStateError::BinOutsideGrid { .. })
    ));
    // a dot left in G never emits a pair
    let g = two_time_correlators(&DensityOperator::pure(Level::G), &l, &grid).unwrap();
    assert!(matches!(
        assemble_two_photon_matrix(&g, &TimeBin::starting_at(0.0, 1.0).unwrap()),
        Err(PairStateError::DegenerateBin { .. })
    ));
}

#[test]
fn reference_concurrences() {
    assert!((concurrence(&TwoPhotonMatrix::bell(Bell::PhiPlus)).unwrap() - 1.0).abs() < 1e-12);
    assert!(concurrence(&TwoPhotonMatrix::maximally_mixed()).unwrap().abs() < 1e-12);
    let w = TwoPhotonMatrix::werner(0.8);
    let c = concurrence(&w).unwrap();
    assert!((c - 0.7).abs() < 1e-9);
    assert!((c - wootters_brute_force(&w.0)).abs() < 1e-9);
}

#[test]
fn record_json_round_trip() {
    let rho = TwoPhotonMatrix::werner(0.6);
    let rec = MatrixRecord::new(&rho, 12.0, TimeBin::starting_at(0.0, 2.0).unwrap()).unwrap();
    let back: MatrixRecord = serde_json::from_str(&serde_json::to_string(&rec).unwrap()).unwrap();
    assert_eq!(back, rec);
    assert!((back.matrix().unwrap().0 - rho.0).norm() < 1e-15);
}

#[test]
fn unphysical_matrices_rejected() {
    let mut m = TwoPhotonMatrix::maximally_mixed().0;
    m[(0, 0)] = C64::from(-0.25);
    m[(3, 3)] = C64::from(0.75);
    assert!(TwoPhotonMatrix::new(m).is_err());
    let mut h = TwoPhotonMatrix::maximally_mixed().0;
    h[(0, 1)] = C64::new(0.0, 0.1);
    assert!(TwoPhotonMatrix::new(h).is_err());
}

fn ket_strategy() -> impl Strategy<Value = Vector4<C64>> {
    prop::array::uniform8(-1.0f64..1.0).prop_filter_map("zero vector", |a| {
        let v = Vector4::new(C64::new(a[0], a[1]), C64::new(a[2], a[3]), C64::new(a[4], a[5]), C64::new(a[6], a[7]));
        let n = v.norm();
        (n > 1e-3).then(|| v / C64::from(n))
    })
}

fn mixed_strategy() -> impl Strategy<Value = TwoPhotonMatrix> {
    prop::array::uniform32(-1.0f64..1.0).prop_filter_map("singular", |a| {
        let g = Matrix4::from_fn(|r, c| C64::new(a[2 * (4 * r + c)], a[2 * (4 * r + c) + 1]));
        let m = g * g.adjoint();
        let t = m.trace().re;
        (t > 1e-6).then(|| TwoPhotonMatrix::new(m / C64::from(t)).unwrap())
    })
}

fn unitary_strategy() -> impl Strategy<Value = Matrix2<C64>> {
    (0.0f64..std::f64::consts::TAU, 0.0f64..std::f64::consts::PI, 0.0f64..std::f64::consts::TAU, 0.0f64..std::f64::consts::TAU)
        .prop_map(|(a, th, b, g)| {
            let (c, s) = ((th / 2.0).cos(), (th / 2.0).sin());
            Matrix2::new(
                C64::from_polar(c, -(a + b) / 2.0),
                -C64::from_polar(s, (b - a) / 2.0),
                C64::from_polar(s, (a - b) / 2.0),
                C64::from_polar(c, (a + b) / 2.0),
            ) * C64::from_polar(1.0, g)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn concurrence_invariant_under_local_unitaries(rho in mixed_strategy(), u1 in unitary_strategy(), u2 in unitary_strategy()) {
        let u = Matrix4::from_fn(|r, c| u1[(r / 2, c / 2)] * u2[(r % 2, c % 2)]);
        let rotated = TwoPhotonMatrix::new(u * rho.0 * u.adjoint()).unwrap();
        prop_assert!((concurrence(&rho).unwrap() - concurrence(&rotated).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn pure_state_concurrence(k in ket_strategy()) {
        let c = concurrence(&TwoPhotonMatrix::pure(&k)).unwrap();
        let expect = 2.0 * (k[0] * k[3] - k[1] * k[2]).norm();
        prop_assert!((c - expect).abs() < 1e-6);
    }

    #[test]
    fn matches_brute_force_wootters(rho in mixed_strategy()) {
        let c = concurrence(&rho).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!((c - wootters_brute_force(&rho.0)).abs() < 1e-7);
    }

    #[test]
    fn fidelity_bounds(a in mixed_strategy(), b in mixed_strategy()) {
        let f = a.fidelity(&b);
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&f));
        prop_assert!((a.fidelity(&a) - 1.0).abs() < 1e-6);
        let d = a.trace_distance(&b);
        prop_assert!(1.0 - f.sqrt() <= d + 1e-7);
    }
}
