//! Static kinks in the nine regime cells on the 501-site chain.

use dsg_chain::{energy_profile, lump_centers, potential_value, solve_kink, ModelParams};

const SITES: usize = 501;

fn cells() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for g in [1e4, 1e5, 1e6] {
        for a in [0.0, 0.6, 0.99] {
            out.push((g, a));
        }
    }
    out
}

#[test]
fn kinks_converge_and_are_monotone() {
    for (g, a) in cells() {
        let p = ModelParams::new(SITES, g, a).unwrap();
        let kink = solve_kink(&p).unwrap();
        let phi = kink.phi();
        assert!(
            kink.residual_norm() <= 1e-12,
            "g={g} a={a}: {}",
            kink.residual_norm()
        );
        assert_eq!(phi[0], 0.0);
        assert_eq!(phi[SITES - 1], 1.0);
        assert!(
            phi.windows(2).all(|w| w[1] >= w[0]),
            "g={g} a={a} not monotone"
        );
        assert!((kink.topological_charge() - 1.0).abs() < 1e-15);
        let last = SITES - 1;
        assert!((0..=last).all(|n| (phi[n] + phi[last - n] - 1.0).abs() <= 1e-9));
    }
}

#[test]
fn energy_is_mirror_symmetric_by_parts() {
    for (g, a) in cells() {
        let p = ModelParams::new(SITES, g, a).unwrap();
        let kink = solve_kink(&p).unwrap();
        let phi = kink.phi();
        let last = SITES - 1;
        let site: Vec<f64> = phi
            .iter()
            .map(|&x| potential_value(x, a).unwrap())
            .collect();
        let bond: Vec<f64> = (0..last)
            .map(|n| 0.5 * g * kink.bond_stretch(n).powi(2))
            .collect();
        let scale = site.iter().chain(&bond).copied().fold(0.0, f64::max);
        for n in 0..=last {
            assert!(
                (site[n] - site[last - n]).abs() <= 1e-9 * scale,
                "site {n} g={g} a={a}"
            );
        }
        for n in 0..last {
            assert!(
                (bond[n] - bond[last - 1 - n]).abs() <= 1e-9 * scale,
                "bond {n} g={g} a={a}"
            );
        }
        let e = energy_profile(&kink);
        for n in 0..last {
            assert!((e.per_site[n] - (site[n] + bond[n])).abs() <= 1e-15 * scale);
        }
    }
}

#[test]
fn bps_energy_bound_in_continuum_regime() {
    // In the continuum limit the kink energy tends to √(2g)·∫₀¹ √V dφ.
    let a = 0.6;
    let steps = 200_000;
    let h = 1.0 / steps as f64;
    let integral: f64 = (0..steps)
        .map(|i| potential_value((i as f64 + 0.5) * h, a).unwrap().sqrt() * h)
        .sum();
    let p = ModelParams::new(SITES, 1e5, a).unwrap();
    let total = energy_profile(&solve_kink(&p).unwrap()).total;
    let bound = (2.0 * p.g()).sqrt() * integral;
    assert!(
        (total - bound).abs() / bound < 1e-3,
        "total {total} bound {bound}"
    );
}

#[test]
fn lump_counts_follow_the_family_parameter() {
    for g in [1e4, 1e5] {
        for (a, count) in [(0.0, 1), (0.6, 2), (0.99, 2)] {
            let p = ModelParams::new(SITES, g, a).unwrap();
            let e = energy_profile(&solve_kink(&p).unwrap());
            let lumps = lump_centers(&e, 0.1).unwrap();
            assert_eq!(lumps.len(), count, "g={g} a={a}: {lumps:?}");
            if count == 2 {
                // bonds are booked on their left site, so mirror images of
                // a lump sit at N − n or N − 1 − n
                let sum = lumps[0] + lumps[1];
                assert!(
                    sum == SITES - 1 || sum == SITES - 2,
                    "mirror pair {lumps:?}"
                );
            }
        }
    }
}
