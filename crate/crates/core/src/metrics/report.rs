use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Metric name to value for one section.
pub type SectionMetrics = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation (`1/(n-1)`); 0 when `n = 1`.
    pub std: f64,
    pub count: usize,
}

impl Aggregate {
    /// False when the standard deviation is the `n = 1` placeholder.
    pub fn std_defined(&self) -> bool {
        self.count > 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub per_section: BTreeMap<String, SectionMetrics>,
    pub aggregates: BTreeMap<String, Aggregate>,
}

/// Mean and sample standard deviation of every metric across sections,
/// reduced in sorted section-id order.
pub fn aggregate_sections(per_section: Vec<(String, SectionMetrics)>) -> Result<MetricReport> {
    if per_section.is_empty() {
        return Err(Error::DegenerateInput("no sections to aggregate".into()));
    }
    let mut sections = BTreeMap::new();
    for (id, metrics) in per_section {
        if sections.insert(id.clone(), metrics).is_some() {
            return Err(Error::DegenerateInput(format!("duplicate section id {id}")));
        }
    }
    let keys: Vec<&String> = sections.values().next().unwrap().keys().collect();
    for (id, m) in &sections {
        if !m.keys().eq(keys.iter().copied()) {
            return Err(Error::DegenerateInput(format!(
                "section {id} reports a different metric set"
            )));
        }
    }
    let mut aggregates = BTreeMap::new();
    for key in keys {
        let vals: Vec<f64> = sections.values().map(|m| m[key]).collect();
        let n = vals.len();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        aggregates.insert(key.clone(), Aggregate { mean, std, count: n });
    }
    Ok(MetricReport {
        per_section: sections,
        aggregates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sec(id: &str, v: f64) -> (String, SectionMetrics) {
        (id.to_string(), BTreeMap::from([("pearson".to_string(), v)]))
    }

    #[test]
    fn two_values() {
        let r = aggregate_sections(vec![sec("b", 3.0), sec("a", 1.0)]).unwrap();
        let agg = r.aggregates["pearson"];
        assert_eq!(agg.mean, 2.0);
        assert!((agg.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.per_section.keys().collect::<Vec<_>>(), vec!["a", "b"]);
    }

    #[test]
    fn single_section_flags_std() {
        let r = aggregate_sections(vec![sec("a", 0.7)]).unwrap();
        let agg = r.aggregates["pearson"];
        assert_eq!(agg.std, 0.0);
        assert!(!agg.std_defined());
    }

    #[test]
    fn errors() {
        assert!(aggregate_sections(vec![]).is_err());
        assert!(aggregate_sections(vec![sec("a", 1.0), sec("a", 2.0)]).is_err());
        let odd = ("b".to_string(), BTreeMap::from([("js".to_string(), 0.1)]));
        assert!(aggregate_sections(vec![sec("a", 1.0), odd]).is_err());
    }
}
