//! Flat `key = value` run configuration shared by every subcommand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ner::{CaseVectorMode, NerDims, NerTrainConfig, Scenario, TruecaserRegime};
use crate::nn::AdamConfig;
use crate::prep::{CapitalizedDef, PrepOptions};
use crate::truecaser::{TruecaserConfig, TruecaserDims};

/// A value that can be written to and read from a config line.
pub trait ConfigValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! display_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse::<$t>().map_err(|e| e.to_string())
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
display_value!(u64, usize, f64, CaseVectorMode, TruecaserRegime, Scenario, CapitalizedDef);

/// Empty means unset.
impl ConfigValue for Option<PathBuf> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        Ok(if s.is_empty() { None } else { Some(PathBuf::from(s)) })
    }
    fn render(&self) -> String {
        self.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
    }
}

macro_rules! run_config {
    ($( $(#[doc = $doc:literal])* $field:ident : $ty:ty = $default:expr ),+ $(,)?) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $( $(#[doc = $doc])* pub $field: $ty, )+
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $( $field: $default, )+ }
            }
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$( stringify!($field) ),+];

            /// Sets one field from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $( stringify!($field) => {
                        self.$field = <$ty as ConfigValue>::parse_value(value)
                            .map_err(|e| Error::Config(format!("{key}: {e}")))?;
                    } )+
                    _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
                }
                self.validate_field(key)
            }

            pub fn get(&self, key: &str) -> Option<String> {
                match key {
                    $( stringify!($field) => Some(self.$field.render()), )+
                    _ => None,
                }
            }
        }
    };
}

run_config! {
    /// Seed for every random draw.
    seed: u64 = 1,
    /// Drop sentences whose capitalised-token ratio exceeds this.
    caps_threshold: f64 = 0.20,
    /// What counts as a capitalised token: first-char or any-upper.
    capitalized: CapitalizedDef = CapitalizedDef::FirstChar,
    /// Lowercase-rule list; empty selects the bundled list.
    rules: Option<PathBuf> = None,
    tc_char_dim: usize = 50,
    tc_hidden: usize = 100,
    tc_dropout: f64 = 0.25,
    tc_min_char_count: u64 = 5,
    tc_max_chars: usize = 1000,
    tc_epochs: usize = 20,
    pass_through_prob: f64 = 0.2,
    word_dim: usize = 100,
    char_dim: usize = 16,
    cnn_filters: usize = 128,
    cnn_width: usize = 3,
    hidden: usize = 256,
    dropout: f64 = 0.25,
    case_mode: CaseVectorMode = CaseVectorMode::None,
    regime: TruecaserRegime = TruecaserRegime::FixedPretrained,
    scenario: Scenario = Scenario::Cased,
    aux_weight: f64 = 1.0,
    min_word_count: usize = 1,
    max_epochs: usize = 50,
    patience: usize = 5,
    /// Pretrained word vectors; empty for random initialisation.
    embeddings: Option<PathBuf> = None,
    lr: f64 = 1e-3,
    beta1: f64 = 0.9,
    beta2: f64 = 0.999,
    eps: f64 = 1e-8,
    clip_norm: f64 = 5.0,
}

impl RunConfig {
    fn validate_field(&self, key: &str) -> Result<()> {
        let ok = match key {
            "caps_threshold" | "pass_through_prob" => (0.0..=1.0).contains(&self.get_f64(key)),
            "tc_dropout" | "dropout" => (0.0..1.0).contains(&self.get_f64(key)),
            "beta1" | "beta2" => (0.0..1.0).contains(&self.get_f64(key)),
            "lr" | "eps" | "clip_norm" => self.get_f64(key) > 0.0,
            "aux_weight" => self.aux_weight >= 0.0,
            "tc_char_dim" | "tc_hidden" | "tc_max_chars" | "word_dim" | "char_dim" | "cnn_filters" | "cnn_width"
            | "hidden" | "max_epochs" | "patience" => self.get(key).is_some_and(|v| v != "0"),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("{key} = {} is out of range", self.get(key).unwrap_or_default())))
        }
    }

    fn get_f64(&self, key: &str) -> f64 {
        self.get(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
    }

    /// Parses `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, i + 1, "expected key = value"))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Every key in declaration order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn prep_options(&self) -> PrepOptions {
        PrepOptions {
            threshold: self.caps_threshold,
            capitalized: self.capitalized,
        }
    }

    pub fn truecaser_dims(&self) -> TruecaserDims {
        TruecaserDims {
            char_dim: self.tc_char_dim,
            hidden: self.tc_hidden,
            dropout: self.tc_dropout,
        }
    }

    pub fn truecaser(&self) -> TruecaserConfig {
        TruecaserConfig {
            dims: self.truecaser_dims(),
            min_char_count: self.tc_min_char_count,
            max_chars: self.tc_max_chars,
            epochs: self.tc_epochs,
            seed: self.seed,
            pass_through_prob: self.pass_through_prob,
            adam: self.adam(),
            clip_norm: self.clip_norm,
        }
    }

    pub fn ner(&self) -> NerTrainConfig {
        NerTrainConfig {
            dims: NerDims {
                word_dim: self.word_dim,
                char_dim: self.char_dim,
                cnn_filters: self.cnn_filters,
                cnn_width: self.cnn_width,
                hidden: self.hidden,
                dropout: self.dropout,
            },
            mode: self.case_mode,
            scenario: self.scenario,
            regime: self.regime,
            aux_weight: self.aux_weight,
            pass_through_prob: self.pass_through_prob,
            truecaser_dims: self.truecaser_dims(),
            min_word_count: self.min_word_count,
            seed: self.seed,
            max_epochs: self.max_epochs,
            patience: self.patience,
            adam: self.adam(),
            clip_norm: self.clip_norm,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_match_component_defaults() {
        let c = RunConfig::default();
        assert_eq!(c.truecaser(), TruecaserConfig::default());
        assert_eq!(c.ner(), NerTrainConfig::default());
        assert_eq!(c.prep_options(), PrepOptions::default());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let p = Path::new("run.cfg");
        let err = RunConfig::parse("seed = 3\n\nbogus = 1\n", p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = RunConfig::parse("# c\ndropout = 1.5\n", p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = RunConfig::parse("case_mode = maybe\n", p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let c = RunConfig::parse("seed=7\n  case_mode = gold \nembeddings =\n", p).unwrap();
        assert_eq!((c.seed, c.case_mode, c.embeddings), (7, CaseVectorMode::Gold, None));
    }

    fn arb_config() -> impl Strategy<Value = RunConfig> {
        (
            any::<u64>(),
            0.0..=1.0f64,
            1usize..500,
            0.0..0.99f64,
            prop_oneof![Just(CaseVectorMode::None), Just(CaseVectorMode::Predicted), Just(CaseVectorMode::Gold)],
            prop_oneof![Just(Scenario::Cased), Just(Scenario::Uncased)],
            1e-6..1.0f64,
            prop::option::of("[a-z/]{1,12}"),
        )
            .prop_map(|(seed, thr, hidden, dropout, mode, scenario, lr, emb)| RunConfig {
                seed,
                caps_threshold: thr,
                hidden,
                dropout,
                case_mode: mode,
                scenario,
                lr,
                embeddings: emb.map(PathBuf::from),
                ..RunConfig::default()
            })
    }

    proptest! {
        #[test]
        fn text_round_trip(c in arb_config()) {
            let text = c.to_text();
            let back = RunConfig::parse(&text, Path::new("rt")).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
