//! Wall-clock and iteration comparison between the two AO methods on matched
//! instances.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::experiment::{median, RunOutcome};
use crate::spec::Method;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexityPoint {
    pub variable: String,
    pub sweep: f64,
    pub elements: usize,
    pub instances: usize,
    pub sca_median_s: f64,
    pub sdr_median_s: f64,
    /// `sdr_median_s / sca_median_s`.
    pub ratio: f64,
    pub sca_median_iters: f64,
    pub sdr_median_iters: f64,
}

impl ComplexityPoint {
    pub fn sca_faster(&self) -> bool {
        self.sca_median_s < self.sdr_median_s
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ComplexitySummary {
    pub points: Vec<ComplexityPoint>,
    pub warning: Option<String>,
}

/// Pairs sca and sdr runs on the same (antennas, sweep value, seed), dropping
/// failed runs and instances without reflecting elements.
pub fn compare_complexity(outcomes: &[RunOutcome]) -> ComplexitySummary {
    type Key = (String, u64, u64);
    let mut sca: BTreeMap<Key, &RunOutcome> = BTreeMap::new();
    let mut sdr: BTreeMap<Key, &RunOutcome> = BTreeMap::new();
    for o in outcomes.iter().filter(|o| o.row.succeeded() && o.elements > 0) {
        let key = (o.row.variable.clone(), o.row.sweep.to_bits(), o.row.seed);
        match o.row.method {
            Method::Sca => {
                sca.insert(key, o);
            }
            Method::Sdr => {
                sdr.insert(key, o);
            }
            _ => {}
        }
    }
    let has = |m: Method| outcomes.iter().any(|o| o.row.method == m);
    if !has(Method::Sca) || !has(Method::Sdr) {
        let warning = "complexity comparison needs both sca and sdr runs".to_string();
        log::warn!("{warning}");
        return ComplexitySummary {
            points: Vec::new(),
            warning: Some(warning),
        };
    }

    let mut groups: BTreeMap<(String, u64), Vec<(&RunOutcome, &RunOutcome)>> = BTreeMap::new();
    for (key, a) in &sca {
        if let Some(b) = sdr.get(key) {
            groups.entry((key.0.clone(), key.1)).or_default().push((a, b));
        }
    }
    let mut points: Vec<ComplexityPoint> = groups
        .into_iter()
        .map(|((variable, bits), pairs)| {
            let col = |f: &dyn Fn(&(&RunOutcome, &RunOutcome)) -> f64| {
                median(&mut pairs.iter().map(f).collect::<Vec<_>>()).expect("group non-empty")
            };
            let sca_s = col(&|p| p.0.row.seconds);
            let sdr_s = col(&|p| p.1.row.seconds);
            ComplexityPoint {
                variable,
                sweep: f64::from_bits(bits),
                elements: pairs[0].0.elements,
                instances: pairs.len(),
                sca_median_s: sca_s,
                sdr_median_s: sdr_s,
                ratio: if sca_s > 0.0 { sdr_s / sca_s } else { f64::NAN },
                sca_median_iters: col(&|p| p.0.row.iters as f64),
                sdr_median_iters: col(&|p| p.1.row.iters as f64),
            }
        })
        .collect();
    points.sort_by(|a, b| a.variable.cmp(&b.variable).then(a.sweep.total_cmp(&b.sweep)));
    for p in points
        .iter()
        .filter(|p| p.elements >= 16 && p.sdr_median_s > 0.0 && !p.sca_faster())
    {
        log::warn!(
            "{}={}: median sca time {:.3}s not below sdr {:.3}s",
            p.variable,
            p.sweep,
            p.sca_median_s,
            p.sdr_median_s
        );
    }
    ComplexitySummary { points, warning: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ResultRow;
    use swipt_core::CVector;

    fn outcome(method: Method, seed: u64, elements: usize, seconds: f64) -> RunOutcome {
        RunOutcome {
            row: ResultRow {
                method,
                seed,
                sweep: elements as f64,
                variable: "n".into(),
                harvested_w: 1.0,
                sr_bps_hz: 1.0,
                iters: 3,
                seconds,
                status: "converged".into(),
            },
            antennas: 2,
            elements,
            trace: vec![1.0],
            inner_iters: (1, 1),
            w: CVector::zeros(2),
            u: CVector::zeros(elements),
        }
    }

    #[test]
    fn ratio_reported_for_matched_instances() {
        let rows = vec![
            outcome(Method::Sca, 1, 32, 0.1),
            outcome(Method::Sdr, 1, 32, 1.0),
            outcome(Method::Sca, 2, 32, 0.3),
            outcome(Method::Sdr, 2, 32, 2.0),
            outcome(Method::Sdr, 3, 32, 9.0),
        ];
        let s = compare_complexity(&rows);
        assert_eq!(s.points.len(), 1);
        let p = &s.points[0];
        assert_eq!(p.instances, 2);
        assert!((p.ratio - 1.5 / 0.2).abs() < 1e-12);
        assert!(p.sca_faster());
    }

    #[test]
    fn missing_method_gives_empty_summary() {
        let s = compare_complexity(&[outcome(Method::Sca, 1, 8, 0.1)]);
        assert!(s.points.is_empty());
        assert!(s.warning.is_some());
    }

    #[test]
    fn surface_free_instances_excluded() {
        let rows = vec![outcome(Method::Sca, 1, 0, 0.1), outcome(Method::Sdr, 1, 0, 1.0)];
        assert!(compare_complexity(&rows).points.is_empty());
    }
}
