//! CSV tables of flow solutions and delay breakdowns.

use std::io::Write;

use super::delay::DelayBreakdown;
use super::flows::FlowSolution;
use crate::error::Result;

/// One row per fog node, then one per cloud server. Per-hop columns are
/// summed over hops; `node` is `f<j>` or `c<k>`.
pub fn write_flows<W: Write>(flow: &FlowSolution, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "node",
        "lambda_light",
        "lambda_heavy",
        "accept_prob",
        "mean_wait_ms",
        "sojourn_light_ms",
        "sojourn_heavy_ms",
        "iot_inflow_light",
        "iot_inflow_heavy",
        "offload_in_light",
        "offload_in_heavy",
        "offload_out_light",
        "offload_out_heavy",
        "cloud_spill_light",
        "cloud_spill_heavy",
        "rho",
    ])?;
    for f in &flow.fogs {
        let inb = |t: usize| f.offload_in.iter().map(|d| d[t]).sum::<f64>();
        w.write_record(
            std::iter::once(format!("f{}", f.id)).chain(
                [
                    f.lambda[0],
                    f.lambda[1],
                    f.accept_prob,
                    f.mean_wait,
                    f.class_sojourn[0],
                    f.class_sojourn[1],
                    f.iot_inflow[0],
                    f.iot_inflow[1],
                    inb(0),
                    inb(1),
                    f.offloaded(0),
                    f.offloaded(1),
                    f.cloud_spill[0],
                    f.cloud_spill[1],
                    f.rho,
                ]
                .iter()
                .map(|v| v.to_string()),
            ),
        )?;
    }
    for c in &flow.clouds {
        let blank = String::new;
        w.write_record([
            format!("c{}", c.id),
            c.l[0].to_string(),
            c.l[1].to_string(),
            blank(),
            c.mean_sojourn().to_string(),
            c.class_sojourn[0].to_string(),
            c.class_sojourn[1].to_string(),
            c.direct[0].to_string(),
            c.direct[1].to_string(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            c.load.rho.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per IoT node.
pub fn write_delays<W: Write>(delays: &DelayBreakdown, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iot",
        "delay_ms",
        "local_ms",
        "fog_ms",
        "cloud_ms",
        "delay_light_ms",
        "delay_heavy_ms",
        "fog_layer_light_ms",
        "fog_layer_heavy_ms",
    ])?;
    for e in &delays.entries {
        let [l, h] = &e.by_type;
        w.write_record([
            format!("i{}", e.iot),
            e.total.to_string(),
            e.local.to_string(),
            e.fog.to_string(),
            e.cloud.to_string(),
            l.total.to_string(),
            h.total.to_string(),
            l.fog_layer.to_string(),
            h.fog_layer.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::delay::{delay_breakdown, FogDelayTerm};
    use crate::analytic::flows::tests::ring;
    use crate::analytic::flows::{solve_flows, FlowOptions};
    use crate::model::PolicyMode;

    #[test]
    fn tables_have_one_row_per_node() {
        let t = ring(3, 5.0, 1, [0.2, 0.1], 0.8);
        let flow = solve_flows(&t, PolicyMode::Afp, &FlowOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_flows(&flow, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 + 1);
        assert!(text.lines().nth(4).unwrap().starts_with("c0,"));

        let d = delay_breakdown(&flow, &t, FogDelayTerm::default()).unwrap();
        let mut buf = Vec::new();
        write_delays(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let mut r = csv::Reader::from_reader(text.as_bytes());
        for (row, e) in r.records().zip(&d.entries) {
            let v: f64 = row.unwrap()[1].parse().unwrap();
            assert_eq!(v, e.total);
        }
    }
}
