//! Decoupled multi-armed bandits for per-player action selection at search
//! tree nodes: UCB1, Beta-Bernoulli Thompson sampling, and a uniform-random
//! baseline.
//!
//! Each player at each node owns an independent [`BanditInstance`] over its
//! own legal actions; opponents are subsumed into the stochastic
//! environment. Values live in `[-1, 1]`. Thompson sampling maps them onto
//! win/loss mass fractionally: an update with value `v` adds `(v + 1) / 2`
//! to the success count and the remainder to the failure count, which is
//! exact for `±1` outcomes and symmetric for draws.

use crate::game::Action;
use rand::distributions::Distribution;
use rand::Rng;
use rand_distr::Beta;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BanditError {
    #[error("action {0} is not an arm of this instance")]
    UnknownAction(Action),
    #[error("no arms")]
    NoArms,
    #[error("best_action on an instance that was never updated")]
    NeverUpdated,
}

/// Which selection rule a [`BanditInstance`] runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BanditAlgo {
    /// UCB1 with exploration constant `c`.
    Ucb1 { c: f64 },
    /// Thompson sampling with Beta prior `(alpha, beta)`.
    Thompson { alpha: f64, beta: f64 },
    /// Uniform-random selection; final action by highest mean value.
    Random,
}

impl BanditAlgo {
    pub fn ucb1(c: f64) -> Self {
        BanditAlgo::Ucb1 { c }
    }

    /// Thompson sampling with the uninformative Beta(1, 1) prior.
    pub fn thompson() -> Self {
        BanditAlgo::Thompson {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

/// Running statistics for one arm.
#[derive(Debug, Clone)]
pub struct ArmStats {
    pub action: Action,
    /// Visit count.
    pub n: u64,
    /// Running mean value in `[-1, 1]`. Meaningless while `n == 0`.
    pub q: f64,
    /// Fractional success (win) mass.
    pub s: f64,
    /// Fractional failure (loss) mass.
    pub f: f64,
}

impl ArmStats {
    fn new(action: Action) -> Self {
        ArmStats {
            action,
            n: 0,
            q: 0.0,
            s: 0.0,
            f: 0.0,
        }
    }

    /// Posterior mean of the Beta(s + alpha, f + beta) distribution.
    pub fn posterior_mean(&self, alpha: f64, beta: f64) -> f64 {
        (self.s + alpha) / (self.s + self.f + alpha + beta)
    }
}

/// UCB1 score of an arm: `Q + c * sqrt(ln N / n)`. Unvisited arms score
/// `+inf` so every arm is tried once before any is repeated.
pub fn ucb_score(arm: &ArmStats, total: u64, c: f64) -> f64 {
    if arm.n == 0 {
        return f64::INFINITY;
    }
    arm.q + c * ((total as f64).ln() / arm.n as f64).sqrt()
}

/// Independent bandit over one player's legal actions at one node.
#[derive(Debug, Clone)]
pub struct BanditInstance {
    algo: BanditAlgo,
    arms: Vec<ArmStats>,
    total: u64,
}

impl BanditInstance {
    /// Builds an instance with one arm per action. The arm set is fixed for
    /// the lifetime of the instance.
    pub fn new(algo: BanditAlgo, actions: &[Action]) -> Self {
        BanditInstance {
            algo,
            arms: actions.iter().copied().map(ArmStats::new).collect(),
            total: 0,
        }
    }

    pub fn algo(&self) -> BanditAlgo {
        self.algo
    }

    pub fn arms(&self) -> &[ArmStats] {
        &self.arms
    }

    /// Total visit count across arms.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Selects an arm for one planning iteration.
    ///
    /// UCB1 picks the highest-scoring arm, breaking score ties uniformly
    /// at random; a lowest-id rule would replay the same action sequence
    /// through every fresh region of the search tree and bias deep-tree
    /// statistics. Thompson sampling draws one Beta sample per arm and
    /// picks the argmax, ties broken the same way. Random picks uniformly.
    pub fn select<R: Rng>(&self, rng: &mut R) -> Result<Action, BanditError> {
        if self.arms.is_empty() {
            return Err(BanditError::NoArms);
        }
        match self.algo {
            BanditAlgo::Ucb1 { c } => {
                let mut best = self.arms[0].action;
                let mut best_score = ucb_score(&self.arms[0], self.total, c);
                let mut ties = 1u32;
                for arm in &self.arms[1..] {
                    let score = ucb_score(arm, self.total, c);
                    if score > best_score {
                        best = arm.action;
                        best_score = score;
                        ties = 1;
                    } else if score == best_score {
                        // Reservoir-style uniform tie break.
                        ties += 1;
                        if rng.gen_range(0..ties) == 0 {
                            best = arm.action;
                        }
                    }
                }
                Ok(best)
            }
            BanditAlgo::Thompson { alpha, beta } => Ok(self.thompson_sample(alpha, beta, rng)),
            BanditAlgo::Random => {
                let i = rng.gen_range(0..self.arms.len());
                Ok(self.arms[i].action)
            }
        }
    }

    fn thompson_sample<R: Rng>(&self, alpha: f64, beta: f64, rng: &mut R) -> Action {
        let mut best = self.arms[0].action;
        let mut best_theta = f64::NEG_INFINITY;
        let mut ties = 0u32;
        for arm in &self.arms {
            let dist = Beta::new(arm.s + alpha, arm.f + beta)
                .expect("Beta parameters are positive by construction");
            let theta = dist.sample(rng);
            if theta > best_theta {
                best = arm.action;
                best_theta = theta;
                ties = 1;
            } else if theta == best_theta {
                // Reservoir-style uniform tie break.
                ties += 1;
                if rng.gen_range(0..ties) == 0 {
                    best = arm.action;
                }
            }
        }
        best
    }

    /// Records an observed value in `[-1, 1]` for `action`.
    pub fn update(&mut self, action: Action, value: f64) -> Result<(), BanditError> {
        let arm = self
            .arms
            .iter_mut()
            .find(|a| a.action == action)
            .ok_or(BanditError::UnknownAction(action))?;
        arm.n += 1;
        arm.q += (value - arm.q) / arm.n as f64;
        let win_mass = (value + 1.0) / 2.0;
        arm.s += win_mass;
        arm.f += 1.0 - win_mass;
        self.total += 1;
        Ok(())
    }

    /// Final action after planning: UCB1 takes the most-visited arm,
    /// Thompson sampling the highest posterior mean. Deterministic
    /// tie-break by lowest action id. Errors if no update ever ran.
    pub fn best_action(&self) -> Result<Action, BanditError> {
        if self.arms.is_empty() {
            return Err(BanditError::NoArms);
        }
        if self.total == 0 {
            return Err(BanditError::NeverUpdated);
        }
        let key = |a: &ArmStats| match self.algo {
            BanditAlgo::Ucb1 { .. } => a.n as f64,
            BanditAlgo::Thompson { alpha, beta } => a.posterior_mean(alpha, beta),
            // Uniform selection estimates plain Monte Carlo means; rank by
            // them and ignore unvisited arms.
            BanditAlgo::Random => {
                if a.n == 0 {
                    f64::NEG_INFINITY
                } else {
                    a.q
                }
            }
        };
        let mut best = &self.arms[0];
        let mut best_key = key(best);
        for arm in &self.arms[1..] {
            let k = key(arm);
            if k > best_key || (k == best_key && arm.action < best.action) {
                best = arm;
                best_key = k;
            }
        }
        Ok(best.action)
    }

    /// Stochastic final action: UCB1 samples proportionally to visit
    /// counts, Thompson sampling draws posteriors once and takes the
    /// argmax. Off the default path; planners use [`Self::best_action`].
    pub fn sample_final<R: Rng>(&self, rng: &mut R) -> Result<Action, BanditError> {
        if self.arms.is_empty() {
            return Err(BanditError::NoArms);
        }
        if self.total == 0 {
            return Err(BanditError::NeverUpdated);
        }
        match self.algo {
            BanditAlgo::Thompson { alpha, beta } => Ok(self.thompson_sample(alpha, beta, rng)),
            _ => {
                let mut pick = rng.gen_range(0..self.total);
                for arm in &self.arms {
                    if pick < arm.n {
                        return Ok(arm.action);
                    }
                    pick -= arm.n;
                }
                unreachable!("total equals the sum of arm counts")
            }
        }
    }
}
