//! The CoAt network: a shared convolution stack, a heuristic branch and an
//! optional policy branch of CoAt blocks, an agent-anchored flatten, and
//! fully connected heads.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domains::{encode_pair, DomainTag, State};
use crate::error::{CoatError, Result};
use crate::layers::{self, AttentionConfig, PosEncConfig};
use crate::ops::{self, Activation};
use crate::tape::{Tape, Var};
use crate::tensor::{ParamStore, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeadMode {
    /// Policy and heuristic heads.
    Dual,
    /// Heuristic head only; the policy branch is not built.
    Single,
}

impl HeadMode {
    pub fn name(self) -> &'static str {
        match self {
            HeadMode::Dual => "dual",
            HeadMode::Single => "single",
        }
    }
}

impl FromStr for HeadMode {
    type Err = CoatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual" => Ok(HeadMode::Dual),
            "single" => Ok(HeadMode::Single),
            other => Err(CoatError::Config(format!("unknown head mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub domain: DomainTag,
    pub preconv_layers: usize,
    pub preconv_filters: usize,
    pub blocks_per_branch: usize,
    pub block_filters: usize,
    pub attention_heads: usize,
    pub d_e: usize,
    pub fc1_width: usize,
    pub head_mode: HeadMode,
    pub action_count: usize,
    pub input_channels: usize,
    /// Number of agent cells gathered by the flatten step.
    pub agents: usize,
}

impl ModelConfig {
    fn for_domain(domain: DomainTag) -> Self {
        Self {
            domain,
            preconv_layers: 2,
            preconv_filters: 16,
            blocks_per_branch: 2,
            block_filters: 24,
            attention_heads: 2,
            d_e: 8,
            fc1_width: 64,
            head_mode: match domain {
                DomainTag::FloorTile => HeadMode::Single,
                _ => HeadMode::Dual,
            },
            action_count: domain.action_count(),
            input_channels: domain.input_channels(),
            agents: domain.agent_count(),
        }
    }

    /// Reduced sizes that train on a CPU in minutes.
    pub fn desk(domain: DomainTag) -> Self {
        Self::for_domain(domain)
    }

    /// 7 pre-conv layers of 64 filters, 4 blocks of 180 filters per branch.
    pub fn full(domain: DomainTag) -> Self {
        Self {
            preconv_layers: 7,
            preconv_filters: 64,
            blocks_per_branch: 4,
            block_filters: 180,
            d_e: 24,
            fc1_width: 256,
            ..Self::for_domain(domain)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("preconv_layers", self.preconv_layers),
            ("preconv_filters", self.preconv_filters),
            ("blocks_per_branch", self.blocks_per_branch),
            ("block_filters", self.block_filters),
            ("attention_heads", self.attention_heads),
            ("d_e", self.d_e),
            ("fc1_width", self.fc1_width),
            ("input_channels", self.input_channels),
            ("agents", self.agents),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(CoatError::Config(format!("{name} must be positive")));
            }
        }
        if self.head_mode == HeadMode::Dual && self.action_count == 0 {
            return Err(CoatError::Config("dual head mode needs at least one action".into()));
        }
        AttentionConfig::new(self.attention_heads, self.block_filters)?;
        PosEncConfig::new(self.d_e)?;
        if self.input_channels != self.domain.input_channels() {
            return Err(CoatError::Config(format!(
                "{} encodes {} channels, config says {}",
                self.domain,
                self.domain.input_channels(),
                self.input_channels
            )));
        }
        if self.agents != self.domain.agent_count() {
            return Err(CoatError::Config(format!(
                "{} has {} agent(s), config says {}",
                self.domain,
                self.domain.agent_count(),
                self.agents
            )));
        }
        Ok(())
    }

    pub fn attention(&self) -> AttentionConfig {
        AttentionConfig {
            heads: self.attention_heads,
            input_channels: self.block_filters,
        }
    }

    pub fn pos_enc(&self) -> PosEncConfig {
        PosEncConfig { depth: self.d_e }
    }

    /// Channels leaving each CoAt block.
    pub fn block_output_channels(&self) -> usize {
        self.block_filters / 3 + self.d_e
    }

    pub fn branches(&self) -> &'static [&'static str] {
        match self.head_mode {
            HeadMode::Dual => &["h", "p"],
            HeadMode::Single => &["h"],
        }
    }

    pub fn fc1_input(&self) -> usize {
        self.branches().len() * self.agents * self.block_output_channels()
    }

    /// Every parameter name with its shape, in creation order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut cin = self.input_channels;
        for i in 0..self.preconv_layers {
            out.push((format!("preconv.{i}.kernel"), vec![3, 3, cin, self.preconv_filters]));
            out.push((format!("preconv.{i}.bias"), vec![self.preconv_filters]));
            cin = self.preconv_filters;
        }
        for branch in self.branches() {
            let mut c = self.preconv_filters;
            for j in 0..self.blocks_per_branch {
                out.push((format!("branch.{branch}.block.{j}.kernel"), vec![3, 3, c, self.block_filters]));
                out.push((format!("branch.{branch}.block.{j}.bias"), vec![self.block_filters]));
                c = self.block_output_channels();
            }
        }
        out.push(("fc1.weight".into(), vec![self.fc1_input(), self.fc1_width]));
        out.push(("fc1.bias".into(), vec![self.fc1_width]));
        out.push(("fc2_h.weight".into(), vec![self.fc1_width, 1]));
        out.push(("fc2_h.bias".into(), vec![1]));
        if self.head_mode == HeadMode::Dual {
            out.push(("fc2_a.weight".into(), vec![self.fc1_width, self.action_count]));
            out.push(("fc2_a.bias".into(), vec![self.action_count]));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }

    /// Flat `key=value` pairs, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("domain", self.domain.to_string()),
            ("preconv_layers", self.preconv_layers.to_string()),
            ("preconv_filters", self.preconv_filters.to_string()),
            ("blocks_per_branch", self.blocks_per_branch.to_string()),
            ("block_filters", self.block_filters.to_string()),
            ("attention_heads", self.attention_heads.to_string()),
            ("d_e", self.d_e.to_string()),
            ("fc1_width", self.fc1_width.to_string()),
            ("head_mode", self.head_mode.name().to_string()),
            ("action_count", self.action_count.to_string()),
            ("input_channels", self.input_channels.to_string()),
            ("agents", self.agents.to_string()),
        ]
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            pairs
                .get(k)
                .ok_or_else(|| CoatError::Config(format!("model config is missing {k}")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| CoatError::Config(format!("model config {k} is not a count")))
        };
        let cfg = Self {
            domain: get("domain")?.parse().map_err(|e: CoatError| CoatError::Config(e.to_string()))?,
            preconv_layers: num("preconv_layers")?,
            preconv_filters: num("preconv_filters")?,
            blocks_per_branch: num("blocks_per_branch")?,
            block_filters: num("block_filters")?,
            attention_heads: num("attention_heads")?,
            d_e: num("d_e")?,
            fc1_width: num("fc1_width")?,
            head_mode: get("head_mode")?.parse()?,
            action_count: num("action_count")?,
            input_channels: num("input_channels")?,
            agents: num("agents")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}x{} preconv, {}x{} blocks/branch, {} heads, d_e={}, fc1={}",
            self.domain,
            self.head_mode.name(),
            self.preconv_layers,
            self.preconv_filters,
            self.blocks_per_branch,
            self.block_filters,
            self.attention_heads,
            self.d_e,
            self.fc1_width
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Real = f32> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput<T> {
    /// Action distribution (dual mode only).
    pub policy: Option<Tensor<T>>,
    /// Raw heuristic head output.
    pub h: T,
}

/// Output nodes of a forward pass recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct TapeOutput {
    pub policy: Option<Var>,
    /// Length-1 vector.
    pub h: Var,
}

pub fn build_model<T: Real>(config: &ModelConfig, seed: u64) -> Result<Model<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    for (name, shape) in config.parameter_shapes() {
        let tensor = if name.ends_with(".bias") {
            Tensor::zeros(&shape)
        } else {
            // He-style uniform init on fan-in
            let fan_in: usize = shape[..shape.len() - 1].iter().product();
            Tensor::uniform(&shape, (6.0 / fan_in as f64).sqrt(), &mut rng)
        };
        params.insert(name, tensor, true)?;
    }
    Ok(Model {
        config: config.clone(),
        params,
    })
}

impl<T: Real> Model<T> {
    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
        }
    }

    fn tensor(&self, name: &str) -> Result<&Tensor<T>> {
        self.params
            .get(name)
            .ok_or_else(|| CoatError::Config(format!("model is missing parameter {name}")))
    }

    fn check_input(&self, x: &Tensor<T>, agents: &[(usize, usize)]) -> Result<()> {
        let (h, w, d) = x.dims3()?;
        if d != self.config.input_channels {
            return Err(CoatError::Contract(format!(
                "input has {d} channels, model expects {}",
                self.config.input_channels
            )));
        }
        if agents.len() != self.config.agents {
            return Err(CoatError::Contract(format!(
                "{} agent positions given, model expects {}",
                agents.len(),
                self.config.agents
            )));
        }
        if let Some(&(r, c)) = agents.iter().find(|&&(r, c)| r >= h || c >= w) {
            return Err(CoatError::Contract(format!("agent ({r}, {c}) outside {h}x{w} grid")));
        }
        Ok(())
    }

    /// Inference pass without recording.
    pub fn forward(&self, x: &Tensor<T>, agents: &[(usize, usize)]) -> Result<ModelOutput<T>> {
        self.check_input(x, agents)?;
        let cfg = &self.config;
        let (h, w, _) = x.dims3()?;
        let mut z = x.clone();
        for i in 0..cfg.preconv_layers {
            let k = self.tensor(&format!("preconv.{i}.kernel"))?;
            let b = self.tensor(&format!("preconv.{i}.bias"))?;
            z = ops::relu(&ops::conv2d_same(&z, k, b)?);
        }
        let enc = layers::positional_encoding::<T>(h, w, cfg.pos_enc());
        let mut flat = Vec::with_capacity(cfg.fc1_input());
        for branch in cfg.branches() {
            let mut y = z.clone();
            for j in 0..cfg.blocks_per_branch {
                let k = self.tensor(&format!("branch.{branch}.block.{j}.kernel"))?;
                let b = self.tensor(&format!("branch.{branch}.block.{j}.bias"))?;
                let mut c = ops::relu(&ops::conv2d_same(&y, k, b)?);
                if c.shape() == y.shape() {
                    c.add_assign(&y)?;
                }
                let a = layers::self_attention(&c, cfg.attention())?;
                y = ops::concat_channels(&[&a, &enc])?;
            }
            flat.extend_from_slice(ops::gather_positions(&y, agents)?.data());
        }
        let flat = Tensor::vector(flat);
        let hidden = ops::dense(&flat, self.tensor("fc1.weight")?, self.tensor("fc1.bias")?, Activation::Relu)?;
        let hv = ops::affine(&hidden, self.tensor("fc2_h.weight")?, self.tensor("fc2_h.bias")?)?;
        let policy = match cfg.head_mode {
            HeadMode::Dual => Some(ops::dense(
                &hidden,
                self.tensor("fc2_a.weight")?,
                self.tensor("fc2_a.bias")?,
                Activation::Softmax,
            )?),
            HeadMode::Single => None,
        };
        Ok(ModelOutput {
            policy,
            h: hv.data()[0],
        })
    }

    /// The same pass recorded on `tape`, parameters borrowed from `self`.
    pub fn forward_tape<'a>(
        &'a self,
        tape: &mut Tape<'a, T>,
        x: Var,
        agents: &[(usize, usize)],
    ) -> Result<TapeOutput> {
        self.check_input(tape.value(x), agents)?;
        let cfg = &self.config;
        let (h, w, _) = tape.value(x).dims3()?;
        let store = &self.params;
        let mut z = x;
        for i in 0..cfg.preconv_layers {
            let k = tape.param(store, &format!("preconv.{i}.kernel"))?;
            let b = tape.param(store, &format!("preconv.{i}.bias"))?;
            let c = tape.conv2d_same(z, k, b)?;
            z = tape.relu(c);
        }
        let enc = tape.input(layers::positional_encoding::<T>(h, w, cfg.pos_enc()));
        let mut parts = Vec::with_capacity(2);
        for branch in cfg.branches() {
            let mut y = z;
            for j in 0..cfg.blocks_per_branch {
                let k = tape.param(store, &format!("branch.{branch}.block.{j}.kernel"))?;
                let b = tape.param(store, &format!("branch.{branch}.block.{j}.bias"))?;
                let conv = tape.conv2d_same(y, k, b)?;
                let mut c = tape.relu(conv);
                if tape.value(c).shape() == tape.value(y).shape() {
                    c = tape.add(c, y)?;
                }
                let a = tape.attention(c, cfg.attention())?;
                y = tape.concat_channels(&[a, enc])?;
            }
            parts.push(tape.gather(y, agents)?);
        }
        let flat = tape.concat(&parts);
        let w1 = tape.param(store, "fc1.weight")?;
        let b1 = tape.param(store, "fc1.bias")?;
        let hidden = tape.dense(flat, w1, b1, Activation::Relu)?;
        let wh = tape.param(store, "fc2_h.weight")?;
        let bh = tape.param(store, "fc2_h.bias")?;
        let hv = tape.affine(hidden, wh, bh)?;
        let policy = match cfg.head_mode {
            HeadMode::Dual => {
                let wa = tape.param(store, "fc2_a.weight")?;
                let ba = tape.param(store, "fc2_a.bias")?;
                Some(tape.dense(hidden, wa, ba, Activation::Softmax)?)
            }
            HeadMode::Single => None,
        };
        Ok(TapeOutput { policy, h: hv })
    }

    /// `max(0, h)` for `state` paired with its own goal.
    pub fn heuristic_value(&self, state: &State) -> Result<f64> {
        if state.domain() != self.config.domain {
            return Err(CoatError::Config(format!(
                "{} model cannot evaluate a {} state",
                self.config.domain,
                state.domain()
            )));
        }
        let enc = encode_pair::<T>(state, &state.goal())?;
        let out = self.forward(&enc.tensor, &enc.agent_tuples())?;
        Ok(out.h.as_f64().max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{generate, GenParams};

    #[test]
    fn single_head_has_no_policy_parameters() {
        let mut cfg = ModelConfig::desk(DomainTag::Maze);
        cfg.head_mode = HeadMode::Single;
        let m: Model<f32> = build_model(&cfg, 0).unwrap();
        assert!(!m.params.contains("fc2_a.weight"));
        assert!(!m.params.names().any(|n| n.starts_with("branch.p")));
    }

    #[test]
    fn same_seed_same_parameters() {
        let cfg = ModelConfig::desk(DomainTag::Sokoban);
        let a: Model<f32> = build_model(&cfg, 9).unwrap();
        let b: Model<f32> = build_model(&cfg, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.params.scalar_count(), cfg.parameter_count());
    }

    #[test]
    fn policy_sums_to_one_and_value_is_clamped() {
        let cfg = ModelConfig::desk(DomainTag::Maze);
        let m: Model<f32> = build_model(&cfg, 1).unwrap();
        let inst = generate(&GenParams::maze(6, 6, 1), 2).unwrap();
        let enc = encode_pair::<f32>(&inst.initial, &inst.goal()).unwrap();
        let out = m.forward(&enc.tensor, &enc.agent_tuples()).unwrap();
        let p = out.policy.unwrap();
        assert_eq!(p.len(), 4);
        assert!((p.sum() - 1.0).abs() < 1e-6);
        assert!(m.heuristic_value(&inst.initial).unwrap() >= 0.0);
    }

    #[test]
    fn tape_matches_plain_forward() {
        let cfg = ModelConfig::desk(DomainTag::FloorTile);
        let m: Model<f64> = build_model(&cfg, 4).unwrap();
        let inst = generate(&GenParams::floortile(3, 4), 1).unwrap();
        let enc = encode_pair::<f64>(&inst.initial, &inst.goal()).unwrap();
        let plain = m.forward(&enc.tensor, &enc.agent_tuples()).unwrap();
        let mut tape = Tape::new();
        let x = tape.input(enc.tensor.clone());
        let out = m.forward_tape(&mut tape, x, &enc.agent_tuples()).unwrap();
        assert!((tape.value(out.h).data()[0] - plain.h).abs() < 1e-12);
        assert!(out.policy.is_none());
    }

    #[test]
    fn wrong_domain_or_position_is_rejected() {
        let m: Model<f32> = build_model(&ModelConfig::desk(DomainTag::Maze), 1).unwrap();
        let inst = generate(&GenParams::sokoban(5, 5, 1), 0).unwrap();
        assert!(matches!(m.heuristic_value(&inst.initial), Err(CoatError::Config(_))));
        let x = Tensor::<f32>::zeros(&[3, 3, 16]);
        assert!(matches!(m.forward(&x, &[(3, 0)]), Err(CoatError::Contract(_))));
    }

    #[test]
    fn config_round_trips_through_pairs() {
        let cfg = ModelConfig::full(DomainTag::Sokoban);
        let pairs = cfg
            .to_pairs()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(ModelConfig::from_pairs(&pairs).unwrap(), cfg);
    }
}
