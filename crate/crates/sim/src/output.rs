//! CSV and JSON writers for campaign rows.

use std::io::Write;

use crate::campaign::MetricsRow;
use crate::error::Result;

pub const CSV_HEADER: &str = "scheme,sweep_var,sweep_value,trials,spectral_eff_mean,spectral_eff_std,sched_users_mean,jain_mean,outer_iters_mean,swap_count_mean";

pub fn write_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> MetricsRow {
        MetricsRow {
            scheme: "jspa1".into(),
            sweep_var: Some("M".into()),
            sweep_value: Some(10),
            trials: 2,
            spectral_eff_mean: 1.5,
            spectral_eff_std: 0.25,
            sched_users_mean: 8.0,
            jain_mean: 0.75,
            outer_iters_mean: 3.0,
            swap_count_mean: 12.5,
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&[row()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "jspa1,M,10,2,1.5,0.25,8.0,0.75,3.0,12.5"
        );
    }

    #[test]
    fn json_round_trip() {
        let mut buf = Vec::new();
        write_json(&[row()], &mut buf).unwrap();
        let back: Vec<MetricsRow> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, vec![row()]);
    }
}
