//! Imitation learning: a partial-observation follower policy trained to
//! mimic a full-state oracle planner.
//!
//! Two protocols are provided. DAgger lets the *follower* drive self-play
//! while the oracle labels every visited state, so the training data
//! covers the learner's own state distribution. Behavioral cloning lets
//! the *oracle* drive and trains on its trajectories only.
//!
//! The policy is a flat differentiable scorer: an affine map from the
//! flattened observation planes to one score per action, with an optional
//! tanh hidden layer. Scores pass through a softmax for the cross-entropy
//! training loss; at decision time the follower plays the highest-scoring
//! masked-legal action.

use crate::game::{derive_seed, fnv1a64, Action, GameState, StateKey};
use crate::grid::{featurize, generate_board, GridConfig, NUM_ACTIONS};
use crate::planners::{Planner, PlannerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FollowerError {
    #[error("action mask is empty")]
    EmptyMask,
    #[error("feature length {got} does not match policy input {expected}")]
    FeatureDims { expected: usize, got: usize },
    #[error("unknown action label {0}")]
    BadLabel(u8),
    #[error("checkpoint is malformed: {0}")]
    BadCheckpoint(String),
    #[error("buffer line {line} is malformed: {reason}")]
    BadBufferLine { line: usize, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One labeled observation: what the player saw and what the oracle
/// would have played there.
#[derive(Debug, Clone, PartialEq)]
pub struct DaggerSample {
    pub features: Vec<f64>,
    pub label: Action,
    pub player: u8,
    pub episode: u32,
    pub step: u32,
}

/// Flat replay buffer of oracle-labeled observations.
#[derive(Debug, Clone, Default)]
pub struct DaggerBuffer {
    pub samples: Vec<DaggerSample>,
}

impl DaggerBuffer {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Writes one line per sample: `episode step player label f0 f1 ...`
    /// with features as fixed-width decimals.
    pub fn export<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for s in &self.samples {
            write!(out, "{} {} {} {}", s.episode, s.step, s.player, s.label.0)?;
            for f in &s.features {
                write!(out, " {f:.6}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn import<R: Read>(input: R) -> Result<Self, FollowerError> {
        let mut samples = Vec::new();
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line.map_err(|source| FollowerError::Io {
                path: "<buffer>".into(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: &str| FollowerError::BadBufferLine {
                line: i + 1,
                reason: reason.to_string(),
            };
            let mut tokens = line.split_whitespace();
            let mut next_num = |name: &str| -> Result<f64, FollowerError> {
                tokens
                    .next()
                    .ok_or_else(|| bad(&format!("missing {name}")))?
                    .parse::<f64>()
                    .map_err(|_| bad(&format!("unparsable {name}")))
            };
            let episode = next_num("episode")? as u32;
            let step = next_num("step")? as u32;
            let player = next_num("player")? as u8;
            let label = next_num("label")? as u8;
            if label as usize >= NUM_ACTIONS {
                return Err(FollowerError::BadLabel(label));
            }
            let features: Vec<f64> = tokens
                .map(|tok| tok.parse::<f64>().map_err(|_| bad("unparsable feature")))
                .collect::<Result<_, _>>()?;
            if features.is_empty() {
                return Err(bad("no features"));
            }
            samples.push(DaggerSample {
                features,
                label: Action(label),
                player,
                episode,
                step,
            });
        }
        Ok(DaggerBuffer { samples })
    }
}

/// Checkpoint provenance: how the parameters were produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyMeta {
    pub seed: u64,
    pub episodes: u32,
    pub mode: String,
}

impl Default for PolicyMeta {
    fn default() -> Self {
        PolicyMeta {
            seed: 0,
            episodes: 0,
            mode: "init".to_string(),
        }
    }
}

/// Differentiable action scorer with softmax outputs.
///
/// Parameter layout (one flat vector): without a hidden layer,
/// `W[action][input]` then `b[action]`; with one, `W1[hidden][input]`,
/// `b1[hidden]`, `W2[action][hidden]`, `b2[action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerPolicy {
    input_dim: usize,
    hidden_dim: usize,
    params: Vec<f64>,
    pub meta: PolicyMeta,
}

impl FollowerPolicy {
    /// Fresh policy with small seeded uniform weights in (-0.05, 0.05).
    pub fn new(input_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let count = Self::param_count(input_dim, hidden_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..count).map(|_| rng.gen_range(-0.05..0.05)).collect();
        FollowerPolicy {
            input_dim,
            hidden_dim,
            params,
            meta: PolicyMeta {
                seed,
                ..PolicyMeta::default()
            },
        }
    }

    fn param_count(input_dim: usize, hidden_dim: usize) -> usize {
        if hidden_dim == 0 {
            NUM_ACTIONS * input_dim + NUM_ACTIONS
        } else {
            hidden_dim * input_dim + hidden_dim + NUM_ACTIONS * hidden_dim + NUM_ACTIONS
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// FNV hash of the raw parameter bits; equal hashes mean bitwise-equal
    /// parameters.
    pub fn param_hash(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.params.len() * 8);
        for p in &self.params {
            bytes.extend_from_slice(&p.to_bits().to_le_bytes());
        }
        fnv1a64(&bytes)
    }

    fn check_features(&self, features: &[f64]) -> Result<(), FollowerError> {
        if features.len() != self.input_dim {
            return Err(FollowerError::FeatureDims {
                expected: self.input_dim,
                got: features.len(),
            });
        }
        Ok(())
    }

    /// Raw per-action scores (pre-softmax). Also returns the hidden
    /// activations when a hidden layer exists, for backprop reuse.
    fn forward(&self, features: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
        if self.hidden_dim == 0 {
            let (w, b) = self.params.split_at(NUM_ACTIONS * self.input_dim);
            let mut scores = vec![0.0; NUM_ACTIONS];
            for a in 0..NUM_ACTIONS {
                let row = &w[a * self.input_dim..(a + 1) * self.input_dim];
                scores[a] = b[a] + dot(row, features);
            }
            (scores, None)
        } else {
            let (h, i) = (self.hidden_dim, self.input_dim);
            let w1 = &self.params[..h * i];
            let b1 = &self.params[h * i..h * i + h];
            let w2 = &self.params[h * i + h..h * i + h + NUM_ACTIONS * h];
            let b2 = &self.params[h * i + h + NUM_ACTIONS * h..];
            let mut hidden = vec![0.0; h];
            for j in 0..h {
                hidden[j] = (b1[j] + dot(&w1[j * i..(j + 1) * i], features)).tanh();
            }
            let mut scores = vec![0.0; NUM_ACTIONS];
            for a in 0..NUM_ACTIONS {
                scores[a] = b2[a] + dot(&w2[a * h..(a + 1) * h], &hidden);
            }
            (scores, Some(hidden))
        }
    }

    pub fn scores(&self, features: &[f64]) -> Result<Vec<f64>, FollowerError> {
        self.check_features(features)?;
        Ok(self.forward(features).0)
    }

    /// Softmax action distribution; sums to 1 up to rounding.
    pub fn probabilities(&self, features: &[f64]) -> Result<Vec<f64>, FollowerError> {
        Ok(softmax(&self.scores(features)?))
    }

    /// Highest-scoring action among the masked-legal set, lowest id on
    /// ties.
    pub fn act(&self, features: &[f64], mask: &[Action]) -> Result<Action, FollowerError> {
        if mask.is_empty() {
            return Err(FollowerError::EmptyMask);
        }
        let scores = self.scores(features)?;
        let mut best = None::<(Action, f64)>;
        for &action in mask {
            let s = scores[action.0 as usize];
            let better = match best {
                None => true,
                Some((b_a, b_s)) => s > b_s || (s == b_s && action.0 < b_a.0),
            };
            if better {
                best = Some((action, s));
            }
        }
        Ok(best.expect("mask checked non-empty").0)
    }

    /// Cross-entropy loss of one sample: `-ln p(label)`.
    pub fn loss(&self, sample: &DaggerSample) -> Result<f64, FollowerError> {
        let probs = self.probabilities(&sample.features)?;
        Ok(-probs[sample.label.0 as usize].max(1e-300).ln())
    }

    /// Mean cross-entropy over a batch with its analytic gradient.
    pub fn loss_and_gradient(
        &self,
        batch: &[&DaggerSample],
    ) -> Result<(f64, Vec<f64>), FollowerError> {
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        let scale = 1.0 / batch.len().max(1) as f64;
        for sample in batch {
            self.check_features(&sample.features)?;
            let (scores, hidden) = self.forward(&sample.features);
            let probs = softmax(&scores);
            total += -probs[sample.label.0 as usize].max(1e-300).ln();
            // d loss / d score = softmax - onehot(label).
            let mut dscore = probs;
            dscore[sample.label.0 as usize] -= 1.0;
            match hidden {
                None => {
                    let off_b = NUM_ACTIONS * self.input_dim;
                    for a in 0..NUM_ACTIONS {
                        let row = &mut grad[a * self.input_dim..(a + 1) * self.input_dim];
                        for (g, &x) in row.iter_mut().zip(&sample.features) {
                            *g += scale * dscore[a] * x;
                        }
                        grad[off_b + a] += scale * dscore[a];
                    }
                }
                Some(hidden) => {
                    let (h, i) = (self.hidden_dim, self.input_dim);
                    let off_b1 = h * i;
                    let off_w2 = off_b1 + h;
                    let off_b2 = off_w2 + NUM_ACTIONS * h;
                    let w2 = &self.params[off_w2..off_b2];
                    // Output layer.
                    for a in 0..NUM_ACTIONS {
                        for j in 0..h {
                            grad[off_w2 + a * h + j] += scale * dscore[a] * hidden[j];
                        }
                        grad[off_b2 + a] += scale * dscore[a];
                    }
                    // Backprop through tanh into the input layer.
                    for j in 0..h {
                        let mut dh = 0.0;
                        for a in 0..NUM_ACTIONS {
                            dh += dscore[a] * w2[a * h + j];
                        }
                        let dpre = dh * (1.0 - hidden[j] * hidden[j]);
                        let row = &mut grad[j * i..(j + 1) * i];
                        for (g, &x) in row.iter_mut().zip(&sample.features) {
                            *g += scale * dpre * x;
                        }
                        grad[off_b1 + j] += scale * dpre;
                    }
                }
            }
        }
        Ok((total * scale, grad))
    }

    /// One SGD step on a batch.
    pub fn train_step(
        &mut self,
        batch: &[&DaggerSample],
        learning_rate: f64,
    ) -> Result<f64, FollowerError> {
        let (loss, grad) = self.loss_and_gradient(batch)?;
        for (p, g) in self.params.iter_mut().zip(&grad) {
            *p -= learning_rate * g;
        }
        Ok(loss)
    }

    /// Serializes to a versioned binary file with a plain-text header.
    pub fn save(&self, path: &Path) -> Result<(), FollowerError> {
        let io_err = |source| FollowerError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = Vec::new();
        out.extend_from_slice(b"simulplan-follower v1\n");
        out.extend_from_slice(format!("input {}\n", self.input_dim).as_bytes());
        out.extend_from_slice(format!("hidden {}\n", self.hidden_dim).as_bytes());
        out.extend_from_slice(format!("actions {NUM_ACTIONS}\n").as_bytes());
        out.extend_from_slice(format!("seed {}\n", self.meta.seed).as_bytes());
        out.extend_from_slice(format!("episodes {}\n", self.meta.episodes).as_bytes());
        out.extend_from_slice(format!("mode {}\n", self.meta.mode).as_bytes());
        out.extend_from_slice(format!("params {}\n", self.params.len()).as_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_bits().to_le_bytes());
        }
        std::fs::write(path, out).map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, FollowerError> {
        let bytes = std::fs::read(path).map_err(|source| FollowerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let bad = |what: &str| FollowerError::BadCheckpoint(what.to_string());

        // Header: 8 newline-terminated text lines, then raw parameter bits.
        let mut offset = 0;
        let mut lines = Vec::new();
        for _ in 0..8 {
            let end = bytes[offset..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("truncated header"))?;
            let line = std::str::from_utf8(&bytes[offset..offset + end])
                .map_err(|_| bad("non-text header"))?;
            lines.push(line.to_string());
            offset += end + 1;
        }
        if lines[0] != "simulplan-follower v1" {
            return Err(bad("unknown version"));
        }
        let field = |idx: usize, key: &str| -> Result<String, FollowerError> {
            lines[idx]
                .strip_prefix(&format!("{key} "))
                .map(str::to_string)
                .ok_or_else(|| bad(&format!("missing {key}")))
        };
        let input_dim: usize = field(1, "input")?.parse().map_err(|_| bad("input"))?;
        let hidden_dim: usize = field(2, "hidden")?.parse().map_err(|_| bad("hidden"))?;
        let actions: usize = field(3, "actions")?.parse().map_err(|_| bad("actions"))?;
        if actions != NUM_ACTIONS {
            return Err(bad("action arity mismatch"));
        }
        let seed: u64 = field(4, "seed")?.parse().map_err(|_| bad("seed"))?;
        let episodes: u32 = field(5, "episodes")?.parse().map_err(|_| bad("episodes"))?;
        let mode = field(6, "mode")?;
        let count: usize = field(7, "params")?.parse().map_err(|_| bad("params"))?;
        if count != Self::param_count(input_dim, hidden_dim) {
            return Err(bad("parameter count mismatch"));
        }
        if bytes.len() - offset != count * 8 {
            return Err(bad("parameter payload size mismatch"));
        }
        let params = bytes[offset..]
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
            .collect();
        Ok(FollowerPolicy {
            input_dim,
            hidden_dim,
            params,
            meta: PolicyMeta {
                seed,
                episodes,
                mode,
            },
        })
    }
}

/// Plays the best masked action under the policy, the spec'd decision rule
/// for evaluation games.
pub fn follower_act(
    policy: &FollowerPolicy,
    features: &[f64],
    mask: &[Action],
) -> Result<Action, FollowerError> {
    policy.act(features, mask)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Imitation-training hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub episodes: u32,
    /// Gradient steps run after each collected episode.
    pub grad_steps_per_episode: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 500,
            grad_steps_per_episode: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Everything a training run produced, for auditing and persistence.
pub struct TrainOutcome {
    pub policy: FollowerPolicy,
    pub buffer: DaggerBuffer,
    /// Number of labeled seats at each step of each episode, in order.
    pub seats_labeled_per_step: Vec<usize>,
    /// Canonical keys of every environment state visited during
    /// collection, for distribution-shift audits.
    pub visited: Vec<StateKey>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CollectMode {
    Dagger,
    Clone,
}

/// DAgger (Algorithm-1 style): the follower drives self-play from partial
/// observations while a full-state oracle planner labels every seat at
/// every step; after each episode a fixed budget of SGD steps runs on the
/// aggregated buffer.
pub fn dagger_train(
    env: &Arc<GridConfig>,
    oracle: &PlannerConfig,
    policy: FollowerPolicy,
    train: &TrainConfig,
) -> Result<TrainOutcome, FollowerError> {
    collect_and_train(env, oracle, policy, train, CollectMode::Dagger)
}

/// Behavioral cloning: identical to [`dagger_train`] except the oracle's
/// own actions drive the episodes, so the data covers only oracle-visited
/// states.
pub fn behavioral_clone(
    env: &Arc<GridConfig>,
    oracle: &PlannerConfig,
    policy: FollowerPolicy,
    train: &TrainConfig,
) -> Result<TrainOutcome, FollowerError> {
    collect_and_train(env, oracle, policy, train, CollectMode::Clone)
}

fn collect_and_train(
    env: &Arc<GridConfig>,
    oracle: &PlannerConfig,
    mut policy: FollowerPolicy,
    train: &TrainConfig,
    mode: CollectMode,
) -> Result<TrainOutcome, FollowerError> {
    let mut buffer = DaggerBuffer::default();
    let mut train_rng = ChaCha8Rng::seed_from_u64(derive_seed(train.seed, 0xF0110));
    let mut seats_labeled_per_step = Vec::new();
    let mut visited = Vec::new();

    for episode in 0..train.episodes {
        let board_seed = derive_seed(train.seed, episode as u64);
        let mut state = generate_board(env, board_seed);
        // One oracle planner per seat, each with its own tree and stream.
        let mut oracles: Vec<Planner> = (0..env.players)
            .map(|seat| {
                Planner::new(oracle.with_seed(derive_seed(board_seed, 101 + seat as u64)))
            })
            .collect();

        let mut step = 0u32;
        while !state.is_terminal() {
            visited.push(state.canonical_key());
            let actors = state.players_to_act();
            let mut follower_joint = Vec::with_capacity(actors.len());
            let mut oracle_joint = Vec::with_capacity(actors.len());
            let mut labeled = 0usize;

            for (slot, &player) in actors.iter().enumerate() {
                let mask = state
                    .legal_actions(player)
                    .expect("alive players have actions");
                let features = featurize(&state, player).as_input();
                follower_joint.push(policy.act(&features, &mask)?);

                match oracles[player.0].plan(&state) {
                    Ok(joint) => {
                        let label = joint.get(slot);
                        debug_assert!(mask.contains(&label));
                        buffer.samples.push(DaggerSample {
                            features,
                            label,
                            player: player.0 as u8,
                            episode,
                            step,
                        });
                        labeled += 1;
                        oracle_joint.push(label);
                    }
                    Err(err) => {
                        // No label for this seat this step; keep the
                        // episode going with a masked fallback.
                        log::warn!(
                            "oracle failed at episode {episode} step {step} seat {player}: {err}"
                        );
                        oracle_joint.push(mask[0]);
                    }
                }
            }
            seats_labeled_per_step.push(labeled);

            let drive = match mode {
                CollectMode::Dagger => follower_joint,
                CollectMode::Clone => oracle_joint,
            };
            let next = state
                .step(&crate::game::JointAction::new(drive))
                .expect("masked actions are always legal");
            for planner in &mut oracles {
                let _ = planner.advance(&next);
            }
            state = next;
            step += 1;
        }
        visited.push(state.canonical_key());

        // Per-episode training budget over the aggregated buffer.
        for _ in 0..train.grad_steps_per_episode {
            if buffer.is_empty() {
                break;
            }
            let batch: Vec<&DaggerSample> = (0..train.batch_size.min(buffer.len()))
                .map(|_| &buffer.samples[train_rng.gen_range(0..buffer.len())])
                .collect();
            policy.train_step(&batch, train.learning_rate)?;
        }
    }

    policy.meta.episodes = train.episodes;
    policy.meta.mode = match mode {
        CollectMode::Dagger => "dagger".to_string(),
        CollectMode::Clone => "bc".to_string(),
    };
    Ok(TrainOutcome {
        policy,
        buffer,
        seats_labeled_per_step,
        visited,
    })
}
