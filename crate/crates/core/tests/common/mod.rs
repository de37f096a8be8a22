//! Spec corpus shared by the integration tests, with hand-derived oracles.
#![allow(dead_code)]

use nalgebra::DMatrix;

use lamperti_kit::model::{Law, LevyBlock, MapSpec, SignState, StateSet};

pub fn states(signs: &[&[i8]]) -> StateSet {
    StateSet::new(signs.iter().map(|s| SignState::new(s.to_vec()).unwrap()).collect()).unwrap()
}

/// `(+,+)` and `(-,+)`.
pub fn two_orthants() -> StateSet {
    states(&[&[1, 1], &[-1, 1]])
}

pub fn four_orthants() -> StateSet {
    states(&[&[1, 1], &[-1, 1], &[1, -1], &[-1, -1]])
}

pub fn flip_q(up: f64, down: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[-up, up, down, -down])
}

/// Uniform jumps to every other state at `rate` each.
pub fn uniform_q(n: usize, rate: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { -rate * (n - 1) as f64 } else { rate })
}

pub fn diag(v: &[f64]) -> Vec<Vec<f64>> {
    (0..v.len())
        .map(|i| (0..v.len()).map(|j| if i == j { v[i] } else { 0.0 }).collect())
        .collect()
}

/// A two-state spec assembled from parts, so its long-run drift can be worked
/// out by hand: with `pi` the stationary law of the chain,
/// `kappa = sum_i pi_i (<a, b_i> + lambda_i <a, m_i>) + sum_i pi_i q_i <a, m_ij>`.
#[derive(Debug, Clone)]
pub struct TwoState {
    pub up: f64,
    pub down: f64,
    pub alpha: Vec<f64>,
    pub drift: [Vec<f64>; 2],
    pub noise: [Vec<f64>; 2],
    /// Rate and mean of Gaussian Lévy jumps (unit-free variance 0.05).
    pub jumps: [(f64, Vec<f64>); 2],
    /// Means of Gaussian jumps at chain transitions `0->1` and `1->0`.
    pub switch_jumps: [Vec<f64>; 2],
}

impl TwoState {
    pub fn drift_only(up: f64, down: f64, alpha: Vec<f64>, b0: Vec<f64>, b1: Vec<f64>) -> Self {
        TwoState {
            up,
            down,
            alpha,
            drift: [b0, b1],
            noise: [vec![0.0, 0.0], vec![0.0, 0.0]],
            jumps: [(0.0, vec![0.0, 0.0]), (0.0, vec![0.0, 0.0])],
            switch_jumps: [vec![0.0, 0.0], vec![0.0, 0.0]],
        }
    }

    pub fn spec(&self) -> MapSpec {
        let block = |k: usize| {
            let mut b = LevyBlock::drift_only(self.drift[k].clone()).with_covariance(diag(&self.noise[k]));
            let (rate, mean) = &self.jumps[k];
            if *rate > 0.0 {
                b = b.with_jumps(*rate, gaussian(mean));
            }
            b
        };
        let mut spec = MapSpec::independent(two_orthants(), flip_q(self.up, self.down), self.alpha.clone(), block(0));
        spec.blocks[1] = block(1);
        for (k, (i, j)) in [(0, 1), (1, 0)].into_iter().enumerate() {
            if self.switch_jumps[k].iter().any(|m| *m != 0.0) {
                spec.transition_jumps.insert((i, j), gaussian(&self.switch_jumps[k]));
            }
        }
        spec
    }

    pub fn stationary(&self) -> [f64; 2] {
        let s = self.up + self.down;
        [self.down / s, self.up / s]
    }

    pub fn kappa(&self) -> f64 {
        let dot = |m: &[f64]| -> f64 { m.iter().zip(&self.alpha).map(|(a, b)| a * b).sum() };
        let pi = self.stationary();
        let rates = [self.up, self.down];
        (0..2)
            .map(|k| pi[k] * (dot(&self.drift[k]) + self.jumps[k].0 * dot(&self.jumps[k].1) + rates[k] * dot(&self.switch_jumps[k])))
            .sum()
    }
}

pub fn gaussian(mean: &[f64]) -> Law {
    Law::Gaussian {
        mean: mean.to_vec(),
        cov: diag(&vec![0.05; mean.len()]),
    }
}

/// Chain `(1, 2)`, so `pi = (2/3, 1/3)`, with `alpha = (1, 1)` and
/// `kappa = target`.
pub fn with_kappa(target: f64, flavour: usize) -> TwoState {
    let (c0, c1) = (target + 0.3, target - 0.6);
    let mut s = TwoState::drift_only(1.0, 2.0, vec![1.0, 1.0], vec![c0 - 0.1, 0.1], vec![c1 / 2.0, c1 / 2.0]);
    s.noise = [vec![0.1, 0.05], vec![0.05, 0.1]];
    match flavour % 3 {
        0 => {}
        1 => {
            // mean-zero jumps in state 0, a drift-neutral transition jump
            s.jumps[0] = (1.0, vec![0.1, -0.1]);
            s.switch_jumps = [vec![0.2, -0.2], vec![0.0, 0.0]];
        }
        _ => {
            // jumps that move xibar, compensated in the drift
            s.jumps[1] = (0.5, vec![0.2, 0.0]);
            s.drift[1][0] -= 0.1;
            s.switch_jumps = [vec![0.0, 0.0], vec![0.0, -0.05]];
            s.drift[0][1] += 0.05;
        }
    }
    s
}

/// The independent-coupling drift spec with `b = (0.5, -0.2)`, `alpha = (1,1)`.
pub fn independent_drift() -> MapSpec {
    MapSpec::independent(
        two_orthants(),
        flip_q(1.0, 1.0),
        vec![1.0, 1.0],
        LevyBlock::drift_only(vec![0.5, -0.2]),
    )
}

/// Noise-free specs for the round-trip checks.
pub fn drift_only_corpus() -> Vec<(&'static str, MapSpec)> {
    let single = |b: Vec<f64>, alpha: Vec<f64>| {
        MapSpec::independent(
            states(&[&[1, 1]]),
            DMatrix::zeros(1, 1),
            alpha,
            LevyBlock::drift_only(b),
        )
    };
    let mut switching = TwoState::drift_only(1.0, 2.0, vec![1.0, 1.0], vec![0.5, -0.2], vec![-0.3, 0.4]).spec();
    switching
        .transition_jumps
        .insert((0, 1), Law::PointMass { value: vec![0.1, -0.3] });
    vec![
        ("unit drift", single(vec![1.0, 1.0], vec![1.0, 1.0])),
        ("mixed signs", single(vec![-0.5, 0.3], vec![1.0, 0.5])),
        ("switching", switching),
    ]
}

/// Specs for the distributional scaling check; all use `alpha = (1, 0.5)`.
pub fn scaling_corpus() -> Vec<(&'static str, MapSpec)> {
    let alpha = vec![1.0, 0.5];
    let mut brownian = with_kappa(0.1, 0).spec();
    brownian.alpha = alpha.clone();

    let block = LevyBlock::drift_only(vec![0.2, -0.1])
        .with_covariance(vec![vec![0.2, 0.05], vec![0.05, 0.1]])
        .with_jumps(
            0.8,
            Law::TwoSidedExp {
                rate_pos: vec![4.0, 3.0],
                rate_neg: vec![3.0, 5.0],
                p_pos: vec![0.5, 0.4],
            },
        );
    let mut jumpy = MapSpec::independent(four_orthants(), uniform_q(4, 0.5), alpha.clone(), block);
    jumpy.blocks[3].drift = vec![-0.3, 0.2];
    jumpy.transition_jumps.insert((0, 3), Law::PointMass { value: vec![0.2, -0.1] });

    let mut killed = with_kappa(-0.2, 1).spec();
    killed.alpha = alpha;
    killed.blocks[1].killing_rate = 0.3;

    vec![("brownian", brownian), ("jumps", jumpy), ("killed", killed)]
}

/// Three specs predicted to die in finite time, then three predicted to live
/// forever, with their long-run drifts.
pub fn lifetime_corpus() -> Vec<(MapSpec, f64)> {
    [-0.5, -0.3, -0.1, 0.1, 0.3, 0.5]
        .iter()
        .enumerate()
        .map(|(k, kappa)| {
            let s = with_kappa(*kappa, k);
            (s.spec(), s.kappa())
        })
        .collect()
}

/// Every corpus spec, for the structural sweeps.
pub fn all_specs() -> Vec<MapSpec> {
    let mut out: Vec<MapSpec> = drift_only_corpus().into_iter().map(|(_, s)| s).collect();
    out.extend(scaling_corpus().into_iter().map(|(_, s)| s));
    out.extend(lifetime_corpus().into_iter().map(|(s, _)| s));
    out.push(independent_drift());
    out
}

/// `exp(m)` by scaling and squaring a truncated Taylor series.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = m.iter().fold(0.0f64, |a, v| a.max(v.abs())) * m.nrows() as f64;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m / 2f64.powi(squarings);
    let n = m.nrows();
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `1 - Phi(z)` for `z > 0`, from the continued fraction of `erfc`.
pub fn normal_upper_tail(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let mut f = 0.0;
    for k in (1..=2000).rev() {
        f = k as f64 / 2.0 / (x + f);
    }
    (-x * x).exp() / (x + f) / std::f64::consts::PI.sqrt() / 2.0
}
