use ckthermo::algebra::{state_eval, AlgebraElement};
use ckthermo::inducing::{build_induced, kac_lift, InducedMeasure};
use ckthermo::spectrum::{bowen_root, equilibrium, spectrum_point};
use ckthermo::transfer::{gibbs_measure, pressure};
use ckthermo::{IncidenceSystem, LocallyConstantFunction, Word};
use proptest::prelude::*;

type F = LocallyConstantFunction<f64>;

fn system(n: usize, bits: u64) -> Option<IncidenceSystem> {
    let matrix = (0..n)
        .map(|i| (0..n).map(|j| ((bits >> (i * n + j)) & 1) as u8).collect())
        .collect();
    IncidenceSystem::new(matrix)
        .ok()
        .filter(|s| s.is_irreducible())
}

fn potential(sys: &IncidenceSystem, vals: &[f64]) -> F {
    let mut k = 0;
    F::from_fn(sys, 1, |_| {
        k += 1;
        vals[(k - 1) % vals.len()]
    })
}

/// `log Σ_{|w|=n} e^{S_n f(w)}` for `n = 1..=len`, by summing over the last letter.
fn log_partitions(sys: &IncidenceSystem, f: &F, len: usize) -> Vec<f64> {
    let k = sys.alphabet_size();
    let weight: Vec<f64> = (0..k).map(|a| f.value_at(sys, &[a]).exp()).collect();
    let mut v = weight.clone();
    let mut offset = 0.0;
    let mut out = Vec::new();
    for _ in 0..len {
        let total: f64 = v.iter().sum();
        out.push(offset + total.ln());
        offset += total.ln();
        let next: Vec<f64> = (0..k)
            .map(|b| {
                (0..k)
                    .filter(|&a| sys.allowed(a, b))
                    .map(|a| v[a] / total)
                    .sum::<f64>()
                    * weight[b]
            })
            .collect();
        v = next;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pressure_is_the_partition_growth_rate(bits in any::<u64>(), vals in prop::collection::vec(-1.5f64..1.5, 3)) {
        if let Some(sys) = system(3, bits) {
            let f = potential(&sys, &vals);
            let p = pressure(&sys, &f).unwrap();
            // Six steps cover every period of a 3-letter system.
            let z = log_partitions(&sys, &f, 400);
            let growth = (z[399] - z[393]) / 6.0;
            prop_assert!((p - growth).abs() < 1e-9, "P {p} growth {growth}");
        }
    }

    #[test]
    fn spectrum_point_identities(a in 0.2f64..2.0, b in 0.2f64..2.0, q in -1.0f64..1.0) {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let j = F::from_values(&sys, 1, vec![a, b]).unwrap();
        let pt = spectrum_point(&sys, &j, q).unwrap();
        prop_assert!(pt.alpha > 0.0);
        let p = pressure(&sys, &j.scale(-pt.s_q)).unwrap();
        prop_assert!((pt.dim - (pt.s_q * pt.alpha + p) / pt.alpha).abs() < 1e-12);
        prop_assert!((p - q * 2f64.ln()).abs() < 1e-10);
        let m = equilibrium(&sys, &j, pt.s_q).unwrap();
        let sigma = state_eval(&sys, &m, &AlgebraElement::from_real_function(&sys, &j)).unwrap();
        prop_assert!((sigma.re - pt.alpha).abs() < 1e-10);
        if q == 0.0 {
            prop_assert!((pt.s_q - bowen_root(&sys, &j).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn kac_round_trip_on_gibbs_measures(bits in any::<u64>(), vals in prop::collection::vec(-1.0f64..1.0, 3)) {
        if let Some(sys) = system(3, bits) {
            let m = gibbs_measure(&sys, &potential(&sys, &vals)).unwrap();
            let base = vec![Word::parse(&sys, "0").unwrap()];
            if let Ok(ind) = build_induced(&sys, &base, &m, 14, 1e-3) {
                let nt = InducedMeasure::restrict(&ind, &m).unwrap();
                let lift = kac_lift(&ind, &nt, 3).unwrap();
                let direct = m.masses_at(&sys, 3).unwrap();
                for (x, y) in lift.nu.weights().iter().zip(&direct) {
                    prop_assert!((x - y).abs() < 1e-12 + 10.0 * lift.missing_mass, "{x} {y} missing {}", lift.missing_mass);
                }
            }
        }
    }
}
