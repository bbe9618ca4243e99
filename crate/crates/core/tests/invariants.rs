//! Property tests for the structural invariants of the learning dynamics:
//! mass bookkeeping, simplex membership, positive-orthant invariance,
//! contraction bookkeeping, and bit-exact reproducibility.

use fplearn_core::abm::{init_population, observables, play_round, run_abm, LearningParams};
use fplearn_core::game::{Belief, Game, TieRule};
use fplearn_core::init::InitialDistribution;
use fplearn_core::linalg::sym_eigenvalues;
use fplearn_core::meanfield::{
    diffusion_matrix, init_ensemble, sde_step, transport_step, Ensemble, MeanBR,
};
use fplearn_core::odes::{box_mean_br_2x2, brd_rhs, meanbr_ode_rhs_2x2, overlap_length, SquareBox};
use proptest::prelude::*;

fn arb_game_2x2() -> impl Strategy<Value = Game> {
    prop::collection::vec(-3.0..3.0f64, 4)
        .prop_map(|p| Game::new(vec![vec![p[0], p[1]], vec![p[2], p[3]]]).unwrap())
}

fn arb_box_2d() -> impl Strategy<Value = InitialDistribution> {
    (prop::collection::vec(0.1..4.0f64, 2), prop::collection::vec(0.1..2.0f64, 2)).prop_map(
        |(lo, w)| InitialDistribution::UniformBox {
            lo: lo.clone(),
            hi: vec![lo[0] + w[0], lo[1] + w[1]],
        },
    )
}

fn arb_mean_br_2() -> impl Strategy<Value = MeanBR> {
    (0.0..=1.0f64).prop_map(|b| MeanBR::new(vec![b, 1.0 - b]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn abm_total_mass_grows_linearly_without_memory(
        game in arb_game_2x2(),
        dist in arb_box_2d(),
        n_agents in 2usize..32,
        h in 0.01..0.25f64,
        rounds in 0u64..128,
        seed in 0u64..1000,
    ) {
        let params = LearningParams::new(h, 0.0).unwrap();
        let mut pop = init_population(n_agents, 2, &dist, seed).unwrap();
        let mass = |p: &fplearn_core::abm::Population| -> f64 {
            p.priors().flat_map(|x| x.iter().copied()).sum()
        };
        let start = mass(&pop);
        for _ in 0..rounds {
            play_round(&mut pop, &game, &params, TieRule::LowestIndex).unwrap();
        }
        let expect = start + 2.0 * rounds as f64 * h;
        prop_assert!((mass(&pop) - expect).abs() < 1e-8 * (1.0 + expect));
    }

    #[test]
    fn abm_priors_stay_in_the_memory_envelope(
        game in arb_game_2x2(),
        dist in arb_box_2d(),
        n_agents in 2usize..24,
        h in 0.01..0.2f64,
        mu in 0.1..4.0f64,
        rounds in 1u64..128,
        seed in 0u64..1000,
    ) {
        prop_assume!(mu * h <= 1.0);
        let params = LearningParams::new(h, mu).unwrap();
        let mut pop = init_population(n_agents, 2, &dist, seed).unwrap();
        let agent_masses = |p: &fplearn_core::abm::Population| -> Vec<f64> {
            (0..p.n_agents()).map(|i| p.prior(i).iter().sum()).collect()
        };
        let start = agent_masses(&pop);
        let lo0 = start.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi0 = start.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let fixed = 1.0 / mu;
        let (lo, hi) = (lo0.min(fixed), hi0.max(fixed));
        for _ in 0..rounds {
            play_round(&mut pop, &game, &params, TieRule::LowestIndex).unwrap();
        }
        for (i, m) in agent_masses(&pop).into_iter().enumerate() {
            prop_assert!(m >= lo - 1e-9 && m <= hi + 1e-9, "agent {i} mass {m} outside [{lo}, {hi}]");
        }
        prop_assert!(pop.priors().all(|x| x.iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn abm_observables_live_on_the_simplex(
        game in arb_game_2x2(),
        dist in arb_box_2d(),
        n_agents in 2usize..32,
        rounds in 0u64..64,
        seed in 0u64..1000,
    ) {
        let params = LearningParams::new(0.05, 0.0).unwrap();
        let mut pop = init_population(n_agents, 2, &dist, seed).unwrap();
        for _ in 0..rounds {
            play_round(&mut pop, &game, &params, TieRule::LowestIndex).unwrap();
        }
        let obs = observables(&pop, &game, TieRule::LowestIndex).unwrap();
        for block in [&obs.lambda, &obs.mean_br] {
            let sum: f64 = block.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(block.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        }
        // Mean best responses of a finite population are rational with
        // denominator N.
        for &v in &obs.mean_br {
            let scaled = v * n_agents as f64;
            prop_assert!((scaled - scaled.round()).abs() < 1e-9);
        }
        // The mean best response never vanishes: its norm is at least 1/n,
        // so the mean prior grows at non-vanishing speed.
        let speed: f64 = obs.mean_br.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(speed >= 1.0 / 2.0 - 1e-12);
        for k in 0..2 {
            prop_assert!(obs.bbox_lo[k] <= obs.mean_prior[k] && obs.mean_prior[k] <= obs.bbox_hi[k]);
        }
    }

    #[test]
    fn abm_runs_are_bit_reproducible(
        game in arb_game_2x2(),
        dist in arb_box_2d(),
        n_agents in 2usize..16,
        seed in 0u64..1000,
    ) {
        let params = LearningParams::new(0.1, 0.5).unwrap();
        let run = |s: u64| {
            let mut pop = init_population(n_agents, 2, &dist, s).unwrap();
            run_abm(&mut pop, &game, &params, 1.0, 0.25, TieRule::LowestIndex).unwrap()
        };
        let a = run(seed);
        let b = run(seed);
        prop_assert!(a.bitwise_eq(&b));
        prop_assert_eq!(a.time(0), 0.0);
        for i in 1..a.len() {
            prop_assert!(a.time(i) > a.time(i - 1));
        }
    }

    #[test]
    fn transport_preserves_the_orthant_and_contracts_distances(
        dist in arb_box_2d(),
        br in arb_mean_br_2(),
        mu in 0.0..2.0f64,
        dt in 0.001..0.5f64,
        m in 2usize..256,
        seed in 0u64..1000,
    ) {
        let mut ens = init_ensemble(&dist, m, seed).unwrap();
        let p0 = ens.positions().to_vec();
        transport_step(&mut ens, &br, mu, dt).unwrap();
        prop_assert!(ens.positions().iter().all(|&v| v >= 0.0));
        // The affine flow scales every pairwise distance by e^{-mu dt}.
        let scale = (-mu * dt).exp();
        let d0 = ((p0[0] - p0[2]).powi(2) + (p0[1] - p0[3]).powi(2)).sqrt();
        let p1 = ens.positions();
        let d1 = ((p1[0] - p1[2]).powi(2) + (p1[1] - p1[3]).powi(2)).sqrt();
        prop_assert!((d1 - scale * d0).abs() <= 1e-12 * (1.0 + d0));
    }

    #[test]
    fn diffusion_matrix_is_psd_with_the_trace_identity(
        x in prop::collection::vec(0.0..3.0f64, 2..4),
        u in 0.0..=1.0f64,
        v in 0.0..=1.0f64,
        mu in 0.0..2.0f64,
    ) {
        let n = x.len();
        let br = if n == 2 {
            MeanBR::new(vec![u, 1.0 - u]).unwrap()
        } else {
            let (a, b) = if u <= v { (u, v) } else { (v, u) };
            MeanBR::new(vec![a, b - a, 1.0 - b]).unwrap()
        };
        let d = diffusion_matrix(&x, &br, mu);
        let m = d.as_slice();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(m[i * n + j], m[j * n + i]);
            }
        }
        let scale = m.iter().fold(1.0f64, |acc, &v| acc.max(v.abs()));
        for ev in sym_eigenvalues(n, m) {
            prop_assert!(ev >= -1e-12 * scale, "eigenvalue {ev}");
        }
        let trace: f64 = (0..n).map(|i| m[i * n + i]).sum();
        let expect: f64 = br
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let norm2: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(k, &xk)| {
                        let e = if k == i { 1.0 } else { 0.0 };
                        (mu * xk - e).powi(2)
                    })
                    .sum();
                w * norm2
            })
            .sum();
        prop_assert!((trace - expect).abs() < 1e-12 * (1.0 + expect.abs()));
    }

    #[test]
    fn sde_without_noise_ignores_the_seed(
        dist in arb_box_2d(),
        br in arb_mean_br_2(),
        mu in 0.0..2.0f64,
        dt in 0.001..0.1f64,
        seeds in (0u64..1000, 0u64..1000),
    ) {
        let step = |noise_seed: u64| {
            let mut ens = init_ensemble(&dist, 64, 7).unwrap();
            sde_step(&mut ens, &br, mu, 0.0, dt, noise_seed, 1).unwrap();
            ens.positions().to_vec()
        };
        let a = step(seeds.0);
        let b = step(seeds.1);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn sde_clips_into_the_orthant(
        dist in arb_box_2d(),
        br in arb_mean_br_2(),
        mu in 0.0..2.0f64,
        h in 0.0..0.5f64,
        dt in 0.001..0.2f64,
        seed in 0u64..1000,
    ) {
        let mut ens = init_ensemble(&dist, 128, seed).unwrap();
        sde_step(&mut ens, &br, mu, h, dt, seed ^ 0x5eed, 3).unwrap();
        prop_assert!(ens.positions().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn box_mean_br_is_a_fraction_and_monotone_in_offset(
        c1 in 1.0..6.0f64,
        c2 in 1.0..6.0f64,
        side in 0.2..2.0f64,
        shift in 0.0..1.0f64,
    ) {
        let game = Game::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let frac = |c1: f64, c2: f64| {
            let bx = SquareBox::new(vec![c1, c2], side).unwrap();
            box_mean_br_2x2(&bx, &game).unwrap().as_slice()[0]
        };
        let here = frac(c1, c2);
        prop_assert!((0.0..=1.0).contains(&here));
        // Sliding the box away from the first action's region shrinks its
        // share.
        prop_assert!(frac(c1 + shift, c2) <= here + 1e-12);
    }

    #[test]
    fn overlap_length_is_symmetric_and_bounded(
        c1 in 0.5..6.0f64,
        c2 in 0.5..6.0f64,
        side in 0.2..2.0f64,
    ) {
        let a = overlap_length(&SquareBox::new(vec![c1, c2], side).unwrap()).unwrap();
        let b = overlap_length(&SquareBox::new(vec![c2, c1], side).unwrap()).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=std::f64::consts::SQRT_2 * side + 1e-15).contains(&a));
    }

    #[test]
    fn brd_rhs_is_conservative_and_homogeneous(
        game in arb_game_2x2(),
        p in 0.01..0.99f64,
        s in 0.1..50.0f64,
    ) {
        let lambda = Belief::new(vec![p, 1.0 - p]).unwrap();
        let rhs = brd_rhs(&lambda, s, &game, TieRule::LowestIndex).unwrap();
        prop_assert!((rhs[0] + rhs[1]).abs() < 1e-15);
        let half = brd_rhs(&lambda, 2.0 * s, &game, TieRule::LowestIndex).unwrap();
        for k in 0..2 {
            prop_assert_eq!(half[k], rhs[k] / 2.0);
        }
    }

    #[test]
    fn meanbr_rhs_conserves_the_component_sum(
        b in 0.0..=1.0f64,
        l in 0.0..5.0f64,
    ) {
        let rhs = meanbr_ode_rhs_2x2(&[b, 1.0 - b], l).unwrap();
        prop_assert_eq!(rhs[0] + rhs[1], 0.0);
    }

    #[test]
    fn ensemble_weights_must_carry_unit_mass(
        m in 1usize..64,
        w in 0.5..2.0f64,
    ) {
        let positions = vec![1.0; 2 * m];
        let weights = vec![w / m as f64; m];
        let result = Ensemble::new(2, positions, weights, 0.0);
        if (w - 1.0).abs() < 1e-13 {
            prop_assert!(result.is_ok());
        } else {
            prop_assert!(result.is_err());
        }
    }
}
