//! Uniform dispatch over RADMI and the baselines for one section.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    ensemble_entropy, one_minus_msp, prediction_switches, softmax_entropy, PredictionStack,
    ProbabilityMap, ProbabilityStack,
};
use crate::error::{Error, Result};
use crate::io::{SectionDataset, Tensor};
use crate::mi::MiConfig;
use crate::pipeline::{radmi, AggregationConfig, UncertaintyMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Radmi,
    Entropy,
    Msp,
    Ensemble,
    McDropout,
    Switches,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Radmi,
        Method::Entropy,
        Method::Msp,
        Method::Ensemble,
        Method::McDropout,
        Method::Switches,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Radmi => "radmi",
            Method::Entropy => "entropy",
            Method::Msp => "msp",
            Method::Ensemble => "ensemble",
            Method::McDropout => "mcdropout",
            Method::Switches => "switches",
        }
    }

    pub fn from_name(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Network evaluations needed to produce this map for `section`, or
    /// `None` when the section lacks the required outputs.
    pub fn forward_passes(self, section: &SectionDataset) -> Option<usize> {
        let leading = |t: &Option<Tensor>| t.as_ref().map(|t| t.shape()[0]);
        match self {
            Method::Radmi => Some(1),
            Method::Entropy | Method::Msp => section.probs.as_ref().map(|_| 1),
            Method::Ensemble => leading(&section.ensemble_probs),
            Method::McDropout => leading(&section.dropout_probs),
            Method::Switches => leading(&section.epoch_preds),
        }
    }

    pub fn compute(
        self,
        section: &SectionDataset,
        mi_cfg: &MiConfig,
        agg_cfg: &AggregationConfig,
    ) -> Result<UncertaintyMap> {
        let need = |t: &Option<Tensor>, file: &str| -> Result<Tensor> {
            t.clone().ok_or_else(|| {
                Error::Config(format!(
                    "section {} has no {file} for method {}",
                    section.section_id,
                    self.name()
                ))
            })
        };
        let mut map = match self {
            Method::Radmi => radmi(section, mi_cfg, agg_cfg)?,
            Method::Entropy => {
                softmax_entropy(&ProbabilityMap::from_tensor(&need(&section.probs, crate::io::PROBS_FILE)?)?)
            }
            Method::Msp => {
                one_minus_msp(&ProbabilityMap::from_tensor(&need(&section.probs, crate::io::PROBS_FILE)?)?)
            }
            Method::Ensemble => ensemble_entropy(&ProbabilityStack::from_tensor(&need(
                &section.ensemble_probs,
                crate::io::ENSEMBLE_FILE,
            )?)?),
            Method::McDropout => ensemble_entropy(&ProbabilityStack::from_tensor(&need(
                &section.dropout_probs,
                crate::io::DROPOUT_FILE,
            )?)?),
            Method::Switches => {
                let classes = section.probs.as_ref().map(|p| p.shape()[0]);
                prediction_switches(&PredictionStack::from_tensor(
                    &need(&section.epoch_preds, crate::io::EPOCH_PREDS_FILE)?,
                    classes,
                )?)
            }
        };
        map.method = self.name().to_string();
        Ok(map)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
