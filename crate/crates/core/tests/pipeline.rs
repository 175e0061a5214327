use qudistill::exec::Execution;
use qudistill::montecarlo::{volume_distilled, volume_nppt, SamplerConfig};
use qudistill::protocol::{
    builtin_protocol, chi_fast, chi_from_vm, distillable, joint_fidelity, measure_step, twirl_recursion,
    yield_trace, Builtin, DistillCriteria, FidelityMode, Policy, ProtocolStep,
};
use qudistill::ring::Modulus;
use qudistill::states::BellDiagonalState;
use qudistill::symplectic::{decompose_to_generators, random_element, word_product};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn m(d: u64) -> Modulus {
    Modulus::new(d).unwrap()
}

#[test]
fn chi_is_sane_for_random_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for d in 2..=4u64 {
        for n in 2..=4usize {
            for keep in 1..n {
                for _ in 0..40 {
                    let step = ProtocolStep::from_element(random_element(m(d), n, &mut rng), keep).unwrap();
                    let chi = chi_from_vm(&step.vm()).unwrap();
                    assert_eq!(chi.coeffs()[0], 1);
                    assert_eq!(chi.eval(1u64), d.pow((n - keep) as u32));
                    if let Some(fast) = chi_fast(&step.vm()).unwrap() {
                        assert_eq!(fast, chi);
                    }
                }
            }
        }
    }
}

#[test]
fn builtin_steps_match_the_recursion_after_a_basis_roundtrip() {
    // rebuild each builtin from its generator word to exercise the full chain
    for d in [3u64, 5] {
        for b in Builtin::ALL.into_iter().filter(|b| b.exists_for(m(d)) && b.n() <= 3) {
            let step = builtin_protocol(b, m(d)).unwrap();
            let word = decompose_to_generators(step.element());
            let rebuilt = word_product(&word, m(d), b.n()).unwrap();
            assert_eq!(&rebuilt, step.element().matrix());
            let chi = b.target_chi(m(d)).unwrap();
            let s = BellDiagonalState::isotropic(m(d), 0.7).unwrap().tensor_power(b.n()).unwrap();
            let (out, p) = measure_step(&s, &step).unwrap();
            let (f, q) = twirl_recursion(0.7, &chi).unwrap();
            assert!((out.fidelity() - f).abs() < 1e-12 && (p - q).abs() < 1e-12);
            let direct = joint_fidelity(&s, &step, FidelityMode::Direct).unwrap();
            let fourier = joint_fidelity(&s, &step, FidelityMode::Fourier).unwrap();
            assert!((direct - f).abs() < 1e-12 && (fourier - f).abs() < 1e-12);
        }
    }
}

#[test]
fn n3_odd_has_vanishing_slope_at_one() {
    for d in [3u64, 5] {
        let chi = Builtin::N3Odd.target_chi(m(d)).unwrap();
        for eps in [1e-2, 1e-3] {
            let (f, _) = twirl_recursion(1.0 - eps, &chi).unwrap();
            assert!((f - 1.0).abs() < 10.0 * eps * eps);
        }
        let chi = Builtin::N2.target_chi(m(d)).unwrap();
        let (f, _) = twirl_recursion(1.0 - 1e-3, &chi).unwrap();
        assert!((f - 1.0).abs() > 10.0 * 1e-6);
    }
}

#[test]
fn state_json_roundtrip_through_a_round() {
    let s = BellDiagonalState::isotropic(m(3), 0.8).unwrap();
    let json = serde_json::to_string(&s).unwrap();
    let back: BellDiagonalState = serde_json::from_str(&json).unwrap();
    // loading renormalizes, which may move the last bit
    assert!(back.probs().iter().zip(s.probs()).all(|(a, b)| (a - b).abs() < 1e-15));
    let trace = yield_trace(Policy::Greedy, &back, 0.99, 50).unwrap();
    assert!(trace.success);
    let json = serde_json::to_value(&trace).unwrap();
    assert_eq!(json["records"][0]["yield"], 1.0);
}

#[test]
fn nppt_volume_bounds_distilled_volume() {
    let criteria = DistillCriteria::default();
    for f in [0.4, 0.5, 0.7] {
        let cfg = SamplerConfig::new(m(3), f, 77).unwrap();
        let distilled = volume_distilled(Execution::default(), &cfg, Policy::Qpa, &criteria, 200).unwrap();
        let nppt = volume_nppt(Execution::default(), &cfg, 200).unwrap();
        let sigma = (distilled.stderr.powi(2) + nppt.stderr.powi(2)).sqrt();
        assert!(nppt.fraction + 3.0 * sigma >= distilled.fraction);
    }
}

#[test]
fn distilled_samples_are_nppt() {
    // distillability implies NPPT, so no sample may be distilled and PPT
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let criteria = DistillCriteria::default();
    for _ in 0..200 {
        let d = rng.random_range(2..=4u64);
        let f = rng.random_range(0.3..0.9);
        let cfg = SamplerConfig::new(m(d), f, rng.random()).unwrap();
        let Ok(s) = qudistill::montecarlo::sample_state(&cfg, &mut cfg.rng_for(0)) else {
            continue;
        };
        for policy in [Policy::Qpa, Policy::Greedy] {
            if distillable(policy, &s, &criteria).unwrap() {
                assert!(s.is_nppt(1e-9).unwrap(), "{policy} distilled a PPT state {s:?}");
            }
        }
    }
}

#[test]
fn execution_modes_give_identical_volumes() {
    let cfg = SamplerConfig::new(m(3), 0.45, 9).unwrap();
    let criteria = DistillCriteria::default();
    let a = volume_distilled(Execution::Sequential, &cfg, Policy::Greedy, &criteria, 100).unwrap();
    let b = volume_distilled(Execution::Parallel, &cfg, Policy::Greedy, &criteria, 100).unwrap();
    assert_eq!(a, b);
}
