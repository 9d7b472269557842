//! Scan and odometry CSV logs.
//!
//! Scan rows are `timestamp_us,layer,azimuth_deg,range_m,echo_valid`; rows
//! sharing a timestamp form one full scan. Odometry rows are
//! `timestamp_us,x_m,y_m,yaw_rad` with an optional trailing `speed_mps`.
//! A header line is accepted when its first field is not a number.

use std::io::{Read, Write};

use ogm_core::pipeline::OdometryRecord;
use ogm_core::scan::{FullScan, PointKind, ScanPoint};

use crate::error::FormatError;

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn is_header(record: &csv::StringRecord) -> bool {
    record.get(0).is_some_and(|f| f.parse::<f64>().is_err())
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<T, FormatError> {
    let raw = record.get(idx).ok_or_else(|| FormatError::at(line, format!("missing field `{name}`")))?;
    raw.parse()
        .map_err(|_| FormatError::at(line, format!("invalid {name} `{raw}`")))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Reads a scan log. `max_range` is the range given to rows without an
/// echo.
pub fn read_scans<R: Read>(input: R, max_range: f64) -> Result<Vec<FullScan>, FormatError> {
    let mut scans = Vec::new();
    let mut current: Option<(u64, Vec<ScanPoint>)> = None;
    for (k, rec) in reader(input).records().enumerate() {
        let rec = rec?;
        if k == 0 && is_header(&rec) {
            continue;
        }
        let line = line_of(&rec);
        if rec.len() != 5 {
            return Err(FormatError::at(line, format!("expected 5 fields, found {}", rec.len())));
        }
        let ts: u64 = field(&rec, 0, "timestamp_us", line)?;
        let layer: u8 = field(&rec, 1, "layer", line)?;
        let az_deg: f64 = field(&rec, 2, "azimuth_deg", line)?;
        let range: f64 = field(&rec, 3, "range_m", line)?;
        let echo: u8 = field(&rec, 4, "echo_valid", line)?;
        if !az_deg.is_finite() {
            return Err(FormatError::at(line, "azimuth must be finite"));
        }
        let point = match echo {
            1 => {
                if !(range >= 0.0 && range <= max_range) {
                    return Err(FormatError::at(line, format!("range {range} outside [0, {max_range}]")));
                }
                ScanPoint::measured(az_deg.to_radians(), range, layer)
            }
            0 => ScanPoint::max_range(az_deg.to_radians(), max_range, layer),
            _ => return Err(FormatError::at(line, format!("echo_valid must be 0 or 1, found {echo}"))),
        };
        match &mut current {
            Some((t, pts)) if *t == ts => pts.push(point),
            Some((t, _)) if ts < *t => {
                return Err(FormatError::at(line, format!("timestamp {ts} goes back from {t}")));
            }
            _ => {
                if let Some((t, pts)) = current.take() {
                    scans.push(FullScan::new(t, pts));
                }
                current = Some((ts, vec![point]));
            }
        }
    }
    if let Some((t, pts)) = current {
        scans.push(FullScan::new(t, pts));
    }
    Ok(scans)
}

/// Writes scans in log format. Virtual points are not part of the format
/// and are skipped.
pub fn write_scans<W: Write>(out: W, scans: &[FullScan]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp_us", "layer", "azimuth_deg", "range_m", "echo_valid"])?;
    for scan in scans {
        for p in &scan.points {
            let (range, echo) = match p.kind {
                PointKind::Measured => (p.range, "1"),
                PointKind::MaxRange => (p.range, "0"),
                PointKind::Virtual => continue,
            };
            w.write_record([
                scan.timestamp_us.to_string(),
                p.layer.to_string(),
                p.azimuth.to_degrees().to_string(),
                range.to_string(),
                echo.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an odometry (or trajectory) log; timestamps must increase.
pub fn read_odometry<R: Read>(input: R) -> Result<Vec<OdometryRecord>, FormatError> {
    let mut out: Vec<OdometryRecord> = Vec::new();
    for (k, rec) in reader(input).records().enumerate() {
        let rec = rec?;
        if k == 0 && is_header(&rec) {
            continue;
        }
        let line = line_of(&rec);
        if rec.len() != 4 && rec.len() != 5 {
            return Err(FormatError::at(line, format!("expected 4 or 5 fields, found {}", rec.len())));
        }
        let ts: u64 = field(&rec, 0, "timestamp_us", line)?;
        let x: f64 = field(&rec, 1, "x_m", line)?;
        let y: f64 = field(&rec, 2, "y_m", line)?;
        let yaw: f64 = field(&rec, 3, "yaw_rad", line)?;
        if !(x.is_finite() && y.is_finite() && yaw.is_finite()) {
            return Err(FormatError::at(line, "pose values must be finite"));
        }
        let speed = match rec.get(4) {
            Some(s) if !s.is_empty() => Some(field::<f64>(&rec, 4, "speed_mps", line)?),
            _ => None,
        };
        if let Some(prev) = out.last() {
            if ts <= prev.timestamp_us {
                return Err(FormatError::at(
                    line,
                    format!("timestamp {ts} is not after {}", prev.timestamp_us),
                ));
            }
        }
        let mut r = OdometryRecord::new(ts, x, y, yaw);
        r.speed = speed;
        out.push(r);
    }
    Ok(out)
}

pub fn write_odometry<W: Write>(out: W, records: &[OdometryRecord]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    let with_speed = records.iter().any(|r| r.speed.is_some());
    if with_speed {
        w.write_record(["timestamp_us", "x_m", "y_m", "yaw_rad", "speed_mps"])?;
    } else {
        w.write_record(["timestamp_us", "x_m", "y_m", "yaw_rad"])?;
    }
    for r in records {
        let mut row = vec![r.timestamp_us.to_string(), r.x.to_string(), r.y.to_string(), r.yaw.to_string()];
        if with_speed {
            row.push(r.speed.map(|s| s.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_rows_by_timestamp() {
        let log = "timestamp_us,layer,azimuth_deg,range_m,echo_valid\n\
                   1000,0,-1.0,5.0,1\n1000,0,1.0,6.0,1\n1000,1,0.0,7.0,1\n2000,0,0.0,3.0,1\n";
        let scans = read_scans(log.as_bytes(), 150.0).unwrap();
        assert_eq!(scans.len(), 2);
        assert_eq!(scans[0].len(), 3);
        assert!(scans[0].is_sorted());
    }

    #[test]
    fn missing_echo_becomes_max_range() {
        let scans = read_scans("5,0,10.0,0,0\n".as_bytes(), 150.0).unwrap();
        let p = scans[0].points[0];
        assert_eq!(p.kind, PointKind::MaxRange);
        assert_eq!(p.range, 150.0);
    }

    #[test]
    fn empty_log_has_no_scans() {
        assert!(read_scans("".as_bytes(), 150.0).unwrap().is_empty());
    }

    #[test]
    fn errors_name_the_line() {
        let err = read_scans("1,0,0,1,1\n2,0,zz,1,1\n".as_bytes(), 150.0).unwrap_err();
        assert_eq!(err.line(), Some(2));
        let err = read_scans("5,0,0,1,1\n4,0,0,1,1\n".as_bytes(), 150.0).unwrap_err();
        assert_eq!(err.line(), Some(2));
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn odometry_roundtrip_with_speed() {
        let mut recs = vec![OdometryRecord::new(0, 1.5, -2.0, 0.25), OdometryRecord::new(40_000, 1.9, -2.0, 0.25)];
        recs[1].speed = Some(10.0);
        let mut buf = Vec::new();
        write_odometry(&mut buf, &recs).unwrap();
        assert_eq!(read_odometry(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn scan_roundtrip() {
        let scan = FullScan::new(
            7,
            vec![ScanPoint::measured(0.1, 4.25, 0), ScanPoint::max_range(0.2, 150.0, 1)],
        );
        let mut buf = Vec::new();
        write_scans(&mut buf, std::slice::from_ref(&scan)).unwrap();
        let back = read_scans(buf.as_slice(), 150.0).unwrap();
        assert_eq!(back.len(), 1);
        for (a, b) in back[0].points.iter().zip(&scan.points) {
            assert!((a.azimuth - b.azimuth).abs() < 1e-12);
            assert_eq!((a.range, a.kind, a.layer), (b.range, b.kind, b.layer));
        }
    }
}
