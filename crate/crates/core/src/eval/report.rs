//! Experiment results and their CSV/JSON renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::SweepPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserResult {
    /// Test EER.
    pub eer: f64,
    /// Test rates at the validation threshold.
    pub far: f64,
    pub frr: f64,
    pub tar: f64,
    pub acc: f64,
    pub threshold: f64,
    pub val_eer: f64,
    pub final_loss: f64,
    /// Test sweep.
    pub sweep: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserOutcome {
    pub user: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<UserResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One row of rates: EER, FAR, FRR, TAR, ACC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Rates {
    pub eer: f64,
    pub far: f64,
    pub frr: f64,
    pub tar: f64,
    pub acc: f64,
}

impl Rates {
    fn of(r: &UserResult) -> Self {
        Self {
            eer: r.eer,
            far: r.far,
            frr: r.frr,
            tar: r.tar,
            acc: r.acc,
        }
    }

    fn fields(&self) -> [f64; 5] {
        [self.eer, self.far, self.frr, self.tar, self.acc]
    }

    fn from_fields(f: [f64; 5]) -> Self {
        Self {
            eer: f[0],
            far: f[1],
            frr: f[2],
            tar: f[3],
            acc: f[4],
        }
    }
}

/// Average, minimum and maximum over the users that completed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub users: usize,
    pub average: Rates,
    pub min: Rates,
    pub max: Rates,
}

impl Summary {
    pub fn from_results<'a>(results: impl IntoIterator<Item = &'a UserResult>) -> Option<Self> {
        let rows: Vec<[f64; 5]> = results.into_iter().map(|r| Rates::of(r).fields()).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let mut sum = [0.0; 5];
        let mut lo = [f64::INFINITY; 5];
        let mut hi = [f64::NEG_INFINITY; 5];
        for row in &rows {
            for k in 0..5 {
                sum[k] += row[k];
                lo[k] = lo[k].min(row[k]);
                hi[k] = hi[k].max(row[k]);
            }
        }
        Some(Self {
            users: rows.len(),
            average: Rates::from_fields(sum.map(|s| s / n)),
            min: Rates::from_fields(lo),
            max: Rates::from_fields(hi),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub encoder: String,
    pub detector: String,
    pub preprocess: String,
    pub ablation: String,
    pub users: Vec<UserOutcome>,
    pub summary: Option<Summary>,
}

impl RunReport {
    pub fn results(&self) -> impl Iterator<Item = &UserResult> {
        self.users.iter().filter_map(|u| u.result.as_ref())
    }

    pub fn mean_eer(&self) -> Option<f64> {
        self.summary.map(|s| s.average.eer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub runs: Vec<RunReport>,
}

fn push_rates(out: &mut String, r: &Rates) {
    for v in r.fields() {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
}

impl ExperimentReport {
    pub fn run(&self, name: &str) -> Option<&RunReport> {
        self.runs.iter().find(|r| r.name == name)
    }

    /// One row per run with user-averaged rates.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("run,encoder,detector,preprocess,ablation,users,failed,eer,far,frr,tar,acc,eer_min,eer_max\n");
        for r in &self.runs {
            let failed = r.users.iter().filter(|u| u.result.is_none()).count();
            let _ = write!(
                out,
                "{},{},{},{},{},{},{}",
                r.name,
                r.encoder,
                r.detector,
                r.preprocess,
                r.ablation,
                r.summary.map_or(0, |s| s.users),
                failed
            );
            match r.summary {
                Some(s) => {
                    for v in s.average.fields() {
                        let _ = write!(out, ",{v}");
                    }
                    let _ = writeln!(out, ",{},{}", s.min.eer, s.max.eer);
                }
                None => out.push_str(",,,,,,,\n"),
            }
        }
        out
    }

    /// Per-user rows for every run, followed by Average, Min and Max rows.
    pub fn per_user_csv(&self) -> String {
        let mut out = String::from("run,user,eer,far,frr,tar,acc\n");
        for r in &self.runs {
            for u in &r.users {
                let _ = write!(out, "{},{}", r.name, u.user);
                match &u.result {
                    Some(res) => push_rates(&mut out, &Rates::of(res)),
                    None => out.push_str(",,,,,\n"),
                }
            }
            if let Some(s) = r.summary {
                for (label, rates) in [("Average", s.average), ("Min", s.min), ("Max", s.max)] {
                    let _ = write!(out, "{},{label}", r.name);
                    push_rates(&mut out, &rates);
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(eer: f64, frr: f64) -> UserResult {
        UserResult {
            eer,
            far: eer,
            frr,
            tar: 1.0 - frr,
            acc: 0.9,
            threshold: 1.0,
            val_eer: eer,
            final_loss: 0.1,
            sweep: vec![],
        }
    }

    #[test]
    fn summary_is_mean_min_max() {
        let rs = [result(0.1, 0.2), result(0.3, 0.0), result(0.05, 0.1)];
        let s = Summary::from_results(&rs).unwrap();
        assert_eq!(s.users, 3);
        assert!((s.average.eer - 0.15).abs() < 1e-12);
        assert_eq!(s.min.eer, 0.05);
        assert_eq!(s.max.eer, 0.3);
        assert!((s.average.tar - (1.0 - s.average.frr)).abs() < 1e-12);
        assert!(Summary::from_results(&[]).is_none());
    }

    #[test]
    fn csv_layout() {
        let users = vec![
            UserOutcome {
                user: "user0".into(),
                result: Some(result(0.1, 0.2)),
                error: None,
            },
            UserOutcome {
                user: "user1".into(),
                result: None,
                error: Some("boom".into()),
            },
        ];
        let summary = Summary::from_results(users.iter().filter_map(|u| u.result.as_ref()));
        let report = ExperimentReport {
            seed: 1,
            runs: vec![RunReport {
                name: "ours".into(),
                encoder: "ours-pca".into(),
                detector: "svdd".into(),
                preprocess: "standardize".into(),
                ablation: "full".into(),
                users,
                summary,
            }],
        };
        let per_user = report.per_user_csv();
        let lines: Vec<&str> = per_user.lines().collect();
        assert_eq!(lines[0], "run,user,eer,far,frr,tar,acc");
        assert_eq!(lines[1], "ours,user0,0.1,0.1,0.2,0.8,0.9");
        assert_eq!(lines[2], "ours,user1,,,,,");
        assert_eq!(lines[3], "ours,Average,0.1,0.1,0.2,0.8,0.9");
        assert_eq!(lines.len(), 6);
        let summary = report.summary_csv();
        assert!(summary.lines().nth(1).unwrap().starts_with("ours,ours-pca,svdd,standardize,full,1,1,0.1,"));
        let back: ExperimentReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }
}
