//! Learning-curve CSV.

use crate::csvio::{fmt_f64, parse_f64, parse_table, parse_usize};
use crate::error::Result;

pub const CURVE_HEADER: &str = "epoch,env_steps,train_return,eval_return_mean,eval_return_std,critic_loss,actor_loss,alpha,repr_loss_total,L_T,L_plus,L_minus,L_inv";

/// One evaluation point. Losses are averages since the previous row; NaN
/// marks a quantity that does not apply (e.g. metric losses for baselines).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub epoch: usize,
    pub env_steps: usize,
    pub train_return: f64,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub repr_loss_total: f64,
    pub l_t: f64,
    pub l_plus: f64,
    pub l_minus: f64,
    pub l_inv: f64,
}

impl CurveRow {
    fn floats(&self) -> [f64; 11] {
        [
            self.train_return,
            self.eval_return_mean,
            self.eval_return_std,
            self.critic_loss,
            self.actor_loss,
            self.alpha,
            self.repr_loss_total,
            self.l_t,
            self.l_plus,
            self.l_minus,
            self.l_inv,
        ]
    }
}

pub fn write_curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in rows {
        let mut fields = vec![r.epoch.to_string(), r.env_steps.to_string()];
        fields.extend(r.floats().iter().map(|&v| fmt_f64(v)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn read_curve_csv(text: &str) -> Result<Vec<CurveRow>> {
    let names: Vec<&str> = CURVE_HEADER.split(',').collect();
    parse_table(text, CURVE_HEADER)?
        .into_iter()
        .map(|f| {
            let x = |i: usize| parse_f64(&f[i], names[i]);
            Ok(CurveRow {
                epoch: parse_usize(&f[0], names[0])?,
                env_steps: parse_usize(&f[1], names[1])?,
                train_return: x(2)?,
                eval_return_mean: x(3)?,
                eval_return_std: x(4)?,
                critic_loss: x(5)?,
                actor_loss: x(6)?,
                alpha: x(7)?,
                repr_loss_total: x(8)?,
                l_t: x(9)?,
                l_plus: x(10)?,
                l_minus: x(11)?,
                l_inv: x(12)?,
            })
        })
        .collect()
}
