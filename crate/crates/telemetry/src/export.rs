//! Duration export.

use std::io::Write;

use teamtime_core::sim::ms_to_seconds;

use crate::error::{Result, TelemetryError};
use crate::record::{SessionRecord, ORDERS_PER_SESSION};

pub const EXPORT_HEADER: &str = "session_id,order1_s,order2_s,order3_s,overall_s";

fn seconds(ms: Option<u64>) -> String {
    ms.map(|ms| ms_to_seconds(ms).to_string()).unwrap_or_default()
}

/// Writes one row per record. Missing orders or a missing SessionEnd leave
/// the cell empty.
pub fn write_durations_csv<'a, W: Write>(records: impl IntoIterator<Item = &'a SessionRecord>, mut out: W) -> Result<()> {
    let io = |source| TelemetryError::Io {
        path: "<export>".into(),
        source,
    };
    writeln!(out, "{EXPORT_HEADER}").map_err(io)?;
    for r in records {
        let orders = r.order_durations_ms();
        let mut row = vec![r.session_id.replace([',', '\n', '"'], "_")];
        row.extend((0..ORDERS_PER_SESSION).map(|k| seconds(orders.get(k).copied())));
        row.push(seconds(r.overall_ms()));
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(())
}

pub fn durations_csv<'a>(records: impl IntoIterator<Item = &'a SessionRecord>) -> String {
    let mut buf = Vec::new();
    write_durations_csv(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{ClientEvent, SessionPayload};

    fn ev(t_ms: u64, kind: &str) -> ClientEvent {
        ClientEvent {
            t_ms,
            kind: kind.into(),
            payload: Default::default(),
        }
    }

    fn rec(events: Vec<ClientEvent>) -> SessionRecord {
        SessionRecord::new(
            SessionPayload {
                session_id: "s".into(),
                worker_id: "w".into(),
                client_version: "t".into(),
                events,
                survey: None,
            },
            0,
        )
    }

    #[test]
    fn subtraction_and_overall() {
        let r = rec(vec![
            ev(1000, "OrderStart"),
            ev(13500, "OrderSent"),
            ev(13500, "OrderStart"),
            ev(20000, "OrderSent"),
            ev(20000, "OrderStart"),
            ev(30001, "OrderSent"),
            ev(30001, "SessionEnd"),
        ]);
        assert_eq!(durations_csv([&r]), format!("{EXPORT_HEADER}\ns,12.5,6.5,10.001,29.001\n"));
    }

    #[test]
    fn incomplete_session_leaves_blanks() {
        let r = rec(vec![ev(0, "OrderStart"), ev(12500, "OrderSent"), ev(12500, "OrderStart")]);
        assert_eq!(durations_csv([&r]), format!("{EXPORT_HEADER}\ns,12.5,,,\n"));
    }

    #[test]
    fn empty_export_has_header() {
        assert_eq!(durations_csv([]), format!("{EXPORT_HEADER}\n"));
    }
}
