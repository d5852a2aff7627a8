use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One fine-tuning experiment: pre-train on `source`, evaluate on `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub source: String,
    pub target: String,
    pub auc_transfer: f64,
    pub auc_base: f64,
    pub distance: f64,
}

impl TransferRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| {
            Err(Error::Analysis(format!(
                "record {} -> {}: {m}",
                self.source, self.target
            )))
        };
        if !(0.0..=1.0).contains(&self.auc_transfer) {
            return bad(format!("auc_transfer {} outside [0, 1]", self.auc_transfer));
        }
        if !(self.auc_base > 0.0 && self.auc_base <= 1.0) {
            return bad(format!("auc_base {} outside (0, 1]", self.auc_base));
        }
        if !(self.distance.is_finite() && self.distance >= 0.0) {
            return bad(format!(
                "distance {} is not a finite non-negative number",
                self.distance
            ));
        }
        Ok(())
    }
}

/// Relative AUC gain from pre-training: `(auc_transfer - auc_base) / auc_base`.
pub fn transferability(r: &TransferRecord) -> Result<f64> {
    if r.auc_base == 0.0 {
        return Err(Error::Analysis(format!(
            "record {} -> {}: auc_base is 0",
            r.source, r.target
        )));
    }
    r.validate()?;
    Ok((r.auc_transfer - r.auc_base) / r.auc_base)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    /// Sample correlation; `None` when either variable is constant.
    pub pearson_r: Option<f64>,
}

/// Least-squares line `y = slope * x + intercept`.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Result<OlsFit> {
    if xs.len() != ys.len() {
        return Err(Error::Analysis(format!("{} xs for {} ys", xs.len(), ys.len())));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::Analysis(format!("regression needs at least 2 points, got {n}")));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Analysis("regression input is not finite".into()));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Analysis("regression covariate is constant".into()));
    }
    let slope = sxy / sxx;
    Ok(OlsFit {
        slope,
        intercept: my - slope * mx,
        pearson_r: (syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)),
    })
}

/// Regression of transferability on distance within one group of records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFit {
    pub group: String,
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r: Option<f64>,
    /// Distance regressed on transferability; absent when transferability is
    /// constant across the group.
    pub reverse_slope: Option<f64>,
    pub reverse_intercept: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferRow {
    #[serde(flatten)]
    pub record: TransferRecord,
    pub transferability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferReport {
    pub groups: Vec<GroupFit>,
    /// Groups with fewer than two records or a constant distance.
    pub skipped: Vec<(String, String)>,
    pub rows: Vec<TransferRow>,
}

pub const ALL_GROUP: &str = "all";

/// Fits transferability against distance per target dataset, or over all
/// records when `group_by_target` is false.
pub fn transfer_report(records: &[TransferRecord], group_by_target: bool) -> Result<TransferReport> {
    let mut rows = Vec::with_capacity(records.len());
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        let t = transferability(r)?;
        let key = if group_by_target {
            r.target.clone()
        } else {
            ALL_GROUP.to_string()
        };
        groups.entry(key).or_default().push((r.distance, t));
        rows.push(TransferRow {
            record: r.clone(),
            transferability: t,
        });
    }
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for (group, pts) in groups {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        match ols_fit(&xs, &ys) {
            Ok(fit) => {
                let rev = ols_fit(&ys, &xs).ok();
                fits.push(GroupFit {
                    group,
                    n: pts.len(),
                    slope: fit.slope,
                    intercept: fit.intercept,
                    r: fit.pearson_r,
                    reverse_slope: rev.map(|f| f.slope),
                    reverse_intercept: rev.map(|f| f.intercept),
                });
            }
            Err(e) => {
                log::warn!("skipping group `{group}`: {e}");
                skipped.push((group, e.to_string()));
            }
        }
    }
    Ok(TransferReport {
        groups: fits,
        skipped,
        rows,
    })
}

pub fn read_transfer_records(path: impl AsRef<Path>) -> Result<Vec<TransferRecord>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let schema = |m: String| Error::Schema {
        path: path.to_path_buf(),
        message: m,
    };
    let headers = reader.headers().map_err(|e| schema(e.to_string()))?.clone();
    let expected = ["source", "target", "auc_transfer", "auc_base", "distance"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(schema(format!("header must be `{}`", expected.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<TransferRecord>().enumerate() {
        let rec = rec.map_err(|e| schema(format!("record {i}: {e}")))?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `group,n,slope,intercept,r,reverse_slope,reverse_intercept` rows.
pub fn format_report_csv(report: &TransferReport) -> String {
    let mut s = String::from("group,n,slope,intercept,r,reverse_slope,reverse_intercept\n");
    for g in &report.groups {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record([
            g.group.clone(),
            g.n.to_string(),
            g.slope.to_string(),
            g.intercept.to_string(),
            opt(g.r),
            opt(g.reverse_slope),
            opt(g.reverse_intercept),
        ])
        .expect("in-memory write");
        s.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory")).expect("utf-8"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: &str, auc_transfer: f64, auc_base: f64, distance: f64) -> TransferRecord {
        TransferRecord {
            source: "s".into(),
            target: t.into(),
            auc_transfer,
            auc_base,
            distance,
        }
    }

    #[test]
    fn transferability_examples() {
        assert!((transferability(&rec("t", 0.9, 0.75, 1.0)).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(transferability(&rec("t", 0.6, 0.6, 1.0)).unwrap(), 0.0);
        assert!((transferability(&rec("t", 0.7, 0.8, 1.0)).unwrap() + 0.125).abs() < 1e-15);
        assert!(transferability(&rec("t", 0.7, 0.0, 1.0)).is_err());
        assert!(transferability(&rec("t", 0.7, 0.5, -1.0)).is_err());
    }

    #[test]
    fn ols_examples() {
        let f = ols_fit(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!((f.slope, f.intercept, f.pearson_r), (1.0, 0.0, Some(1.0)));
        let f = ols_fit(&[0.0, 1.0, 2.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!((f.slope, f.intercept, f.pearson_r), (0.0, 5.0, None));
        assert!(ols_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(ols_fit(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn report_groups_and_skips() {
        let records = vec![
            rec("a", 0.9, 0.8, 0.0),
            rec("a", 0.85, 0.8, 1.0),
            rec("a", 0.8, 0.8, 2.0),
            rec("b", 0.9, 0.8, 1.0),
        ];
        let r = transfer_report(&records, true).unwrap();
        assert_eq!(r.groups.len(), 1);
        assert_eq!(r.groups[0].group, "a");
        assert!(r.groups[0].slope < 0.0);
        assert!((r.groups[0].r.unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.rows.len(), 4);
        let all = transfer_report(&records, false).unwrap();
        assert_eq!(all.groups[0].n, 4);
        let csv = format_report_csv(&r);
        assert!(csv.starts_with("group,n,slope"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn constant_transferability_has_zero_slope() {
        let records: Vec<_> = (0..5).map(|i| rec("a", 0.95, 0.95, i as f64)).collect();
        let g = &transfer_report(&records, true).unwrap().groups[0];
        assert_eq!(g.slope, 0.0);
        assert_eq!(g.r, None);
        assert_eq!(g.reverse_slope, None);
    }
}
