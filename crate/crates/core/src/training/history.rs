use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::fsutil::write_atomic;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

/// One record per completed epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    fn has_validation(&self) -> bool {
        self.records.iter().any(|r| r.val_loss.is_some())
    }

    /// `epoch,loss,accuracy[,val_loss,val_accuracy]`, values to 9 significant
    /// digits.
    pub fn to_csv(&self) -> String {
        let val = self.has_validation();
        let mut out = String::from("epoch,loss,accuracy");
        if val {
            out.push_str(",val_loss,val_accuracy");
        }
        out.push('\n');
        for r in &self.records {
            write!(
                out,
                "{},{},{}",
                r.epoch,
                format_g(r.loss, 9),
                format_g(r.accuracy, 9)
            )
            .unwrap();
            if val {
                let opt = |v: Option<f64>| v.map(|v| format_g(v, 9)).unwrap_or_default();
                write!(out, ",{},{}", opt(r.val_loss), opt(r.val_accuracy)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }
}

/// Formats like C's `%.{sig}g`: `sig` significant digits, trailing zeros
/// removed, scientific notation outside `1e-4 <= |x| < 10^sig`.
pub fn format_g(x: f64, sig: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
