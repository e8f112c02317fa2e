use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::GeluKind;

/// Which branch, if any, is switched off.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    /// Attribute and lawsuit inputs are zeroed; only the supplement remains.
    NoIntra,
    /// Hypergraph output replaced by zeros.
    NoHyper,
    /// Heterogeneous-graph output replaced by zeros.
    NoHeter,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Full,
        Ablation::NoIntra,
        Ablation::NoHyper,
        Ablation::NoHeter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoIntra => "no_intra",
            Ablation::NoHyper => "no_hyper",
            Ablation::NoHeter => "no_heter",
        }
    }
}

/// Hypergraph layer operator: `(I - Theta) X W` or `Theta X W`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvForm {
    #[default]
    Laplacian,
    Classical,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperVariant {
    /// One convolution per hyperedge type, mixed by learned type weights.
    #[default]
    Typed,
    /// All hyperedges pooled into one untyped hypergraph.
    Merged,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntraVariant {
    /// Embedded, time-decayed lawsuits plus attributes.
    #[default]
    Encoder,
    /// The twelve-column count table through one linear layer.
    Frequency,
}

/// Representation fed to the fusion MLP.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlpInput {
    #[default]
    Intra,
    Heter,
}

/// Per-class multipliers of the negative log-likelihood.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeights {
    #[default]
    Uniform,
    /// Bankrupt weight = surviving count / bankrupt count in the train split.
    Balanced,
    Fixed {
        survive: f64,
        bankrupt: f64,
    },
}

fn default_epochs() -> usize {
    500
}

/// Everything that shapes a training run. Unknown keys are rejected when
/// deserializing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Width `d` of intra-risk representations.
    pub input_dim: usize,
    /// Width `d'` of contagion representations.
    pub output_dim: usize,
    /// Width of one lawsuit embedding.
    pub lawsuit_dim: usize,
    /// Width of the per-node supplement embedding.
    pub supplement_dim: usize,
    pub seed: u64,
    pub lr_max: f64,
    pub lr_min: f64,
    pub class_weights: ClassWeights,
    pub ablation: Ablation,
    pub intra_variant: IntraVariant,
    pub hyper_variant: HyperVariant,
    pub conv_form: ConvForm,
    pub hyper_layers: usize,
    pub hyper_activation: bool,
    pub heter_blocks: usize,
    pub directed_relations: bool,
    pub weighted_uses_projected: bool,
    pub fusion_mlp_input: MlpInput,
    pub leaky_slope: f64,
    pub gelu: GeluKind,
    pub bn_eps: f64,
    /// Replaces batch normalization with the identity. Test use only.
    pub bn_identity: bool,
    pub w_recent: f64,
    pub w_old: f64,
    pub trainable_decay: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            input_dim: 16,
            output_dim: 12,
            lawsuit_dim: 20,
            supplement_dim: 16,
            seed: 0,
            lr_max: 0.01,
            lr_min: 0.0,
            class_weights: ClassWeights::Uniform,
            ablation: Ablation::Full,
            intra_variant: IntraVariant::Encoder,
            hyper_variant: HyperVariant::Typed,
            conv_form: ConvForm::Laplacian,
            hyper_layers: 2,
            hyper_activation: true,
            heter_blocks: 1,
            directed_relations: false,
            weighted_uses_projected: false,
            fusion_mlp_input: MlpInput::Intra,
            leaky_slope: 0.01,
            gelu: GeluKind::Tanh,
            bn_eps: 1e-5,
            bn_identity: false,
            w_recent: 0.1,
            w_old: 1.0,
            trainable_decay: false,
        }
    }
}

impl TrainConfig {
    /// Widths of the cause, court and verdict blocks of a lawsuit embedding.
    /// Court and verdict get `3/10` of the width each, cause the rest.
    pub fn lawsuit_widths(&self) -> (usize, usize, usize) {
        let side = (self.lawsuit_dim * 3 / 10).max(1);
        (self.lawsuit_dim - 2 * side, side, side)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("output_dim", self.output_dim),
            ("supplement_dim", self.supplement_dim),
            ("hyper_layers", self.hyper_layers),
            ("heter_blocks", self.heter_blocks),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.lawsuit_dim < 3 {
            return bad(format!(
                "lawsuit_dim must be at least 3, got {}",
                self.lawsuit_dim
            ));
        }
        if !(self.lr_max.is_finite() && self.lr_max > 0.0) {
            return bad(format!("lr_max must be positive, got {}", self.lr_max));
        }
        if !(self.lr_min.is_finite() && self.lr_min >= 0.0 && self.lr_min <= self.lr_max) {
            return bad(format!(
                "lr_min must lie in [0, lr_max], got {}",
                self.lr_min
            ));
        }
        for (name, v) in [("w_recent", self.w_recent), ("w_old", self.w_old)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.bn_eps.is_finite() && self.bn_eps >= 0.0) {
            return bad(format!("bn_eps must be non-negative, got {}", self.bn_eps));
        }
        if !self.leaky_slope.is_finite() {
            return bad(String::from("leaky_slope must be finite"));
        }
        if let ClassWeights::Fixed { survive, bankrupt } = self.class_weights {
            if !(survive.is_finite() && bankrupt.is_finite() && survive >= 0.0 && bankrupt >= 0.0) {
                return bad(String::from(
                    "class weights must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.lawsuit_widths(), (8, 6, 6));
        assert_eq!((c.epochs, c.input_dim, c.output_dim), (500, 16, 12));
    }

    #[test]
    fn widths_always_sum() {
        for d in 3..64 {
            let c = TrainConfig {
                lawsuit_dim: d,
                ..TrainConfig::default()
            };
            let (a, b, v) = c.lawsuit_widths();
            assert_eq!(a + b + v, d);
            assert!(a >= 1);
        }
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            TrainConfig {
                output_dim: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                lr_min: 1.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                w_old: -1.0,
                ..TrainConfig::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}
