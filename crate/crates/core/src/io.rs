//! File formats: single-column signal CSV, 32-bit float WAV, profile CSV,
//! coefficient-magnitude grids, and JSON.
//!
//! Signal CSV:
//!
//! ```text
//! # fs=16000
//! index,value
//! 0,0.25
//! ```
//!
//! Readers accept an optional `# fs=` comment, an optional header row, and
//! take the value from the last column. Numbers are written with the
//! shortest representation that round-trips exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::analysis::Profile;
use crate::error::{Error, Result};
use crate::grid::RealGrid;
use crate::signal::TimeSignal;

pub fn write_signal_csv(path: &Path, x: &TimeSignal) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# fs={}", x.fs)?;
    writeln!(w, "index,value")?;
    for (i, v) in x.samples.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a signal CSV. `fs` overrides any `# fs=` comment and is required
/// when the file has none.
pub fn read_signal_csv(path: &Path, fs: Option<f64>) -> Result<TimeSignal> {
    let reader = BufReader::new(File::open(path)?);
    let mut file_fs = None;
    let mut samples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("fs=") {
                file_fs = Some(v.trim().parse::<f64>().map_err(|_| {
                    Error::Malformed(format!("{}: bad sample rate '{v}'", path.display()))
                })?);
            }
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => samples.push(v),
            Err(_) if samples.is_empty() => continue, // header
            Err(_) => {
                return Err(Error::Malformed(format!(
                    "{}:{}: not a number: '{field}'",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    let fs = fs.or(file_fs).ok_or_else(|| {
        Error::Malformed(format!(
            "{}: no '# fs=' line; pass the sample rate explicitly",
            path.display()
        ))
    })?;
    Ok(TimeSignal::new(samples, fs))
}

pub fn write_wav(path: &Path, x: &TimeSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: x.fs.round() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &v in &x.samples {
        w.write_sample(v as f32)?;
    }
    w.finalize()?;
    Ok(())
}

/// Reads the first channel of a WAV file as doubles; integer formats are
/// scaled to `[-1, 1)`.
pub fn read_wav(path: &Path) -> Result<TimeSignal> {
    let mut r = hound::WavReader::open(path)?;
    let spec = r.spec();
    let channels = spec.channels.max(1) as usize;
    let all: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => r
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            r.samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let samples = all.into_iter().step_by(channels).collect();
    Ok(TimeSignal::new(samples, spec.sample_rate as f64))
}

/// Dispatches on the extension: `.wav` or anything else as CSV.
pub fn read_signal(path: &Path, fs: Option<f64>) -> Result<TimeSignal> {
    let is_wav = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    if is_wav {
        let mut x = read_wav(path)?;
        if let Some(fs) = fs {
            x.fs = fs;
        }
        Ok(x)
    } else {
        read_signal_csv(path, fs)
    }
}

pub fn write_profile_csv(path: &Path, p: &Profile) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{},value", p.axis.column_name())?;
    for (i, v) in p.values.iter().enumerate() {
        writeln!(w, "{},{v}", p.location(i))?;
    }
    w.flush()?;
    Ok(())
}

/// Rows are frequency bins, columns frames; the first column is the bin.
pub fn write_grid_csv(path: &Path, g: &RealGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "bin")?;
    for m in 0..g.cols() {
        write!(w, ",frame_{m}")?;
    }
    writeln!(w)?;
    for k in 0..g.rows() {
        write!(w, "{k}")?;
        for v in g.row(k) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv(path: &Path) -> Result<RealGrid> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let values = rec
            .iter()
            .skip(1)
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Malformed(format!("{}: not a number: '{f}'", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(Error::Malformed(format!("{}: ragged rows", path.display())))
            }
            _ => {}
        }
        data.extend(values);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Malformed(format!("{}: empty grid", path.display())))?;
    Ok(RealGrid::from_vec(rows, cols, data))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Axis;
    use proptest::prelude::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let x = TimeSignal::new(vec![0.1, -1e-300, 12345.678901234567, f64::MIN_POSITIVE], 12000.0);
        write_signal_csv(&p, &x).unwrap();
        assert_eq!(read_signal(&p, None).unwrap(), x);
        let over = read_signal(&p, Some(8000.0)).unwrap();
        assert_eq!(over.fs, 8000.0);
    }

    #[test]
    fn csv_variants() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("plain.csv");
        std::fs::write(&p, "1.5\n-2\n3e2\n").unwrap();
        assert!(read_signal(&p, None).is_err());
        assert_eq!(read_signal(&p, Some(10.0)).unwrap().samples, vec![1.5, -2.0, 300.0]);
        std::fs::write(&p, "value\n1\nabc\n").unwrap();
        assert!(matches!(read_signal(&p, Some(1.0)), Err(Error::Malformed(_))));
    }

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        let x = TimeSignal::new(vec![0.5, -0.25, 100.0, 0.0], 16000.0);
        write_wav(&p, &x).unwrap();
        let back = read_signal(&p, None).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn grid_and_profile_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let g = RealGrid::from_fn(3, 4, |r, c| (r * 10 + c) as f64 / 7.0);
        write_grid_csv(&p, &g).unwrap();
        assert_eq!(read_grid_csv(&p).unwrap(), g);

        let prof = Profile {
            values: vec![0.0, 2.0, 1.0],
            step: 62.5,
            axis: Axis::Hz,
        };
        let q = dir.path().join("p.csv");
        write_profile_csv(&q, &prof).unwrap();
        let text = std::fs::read_to_string(&q).unwrap();
        assert_eq!(text, "freq_hz,value\n0,0\n62.5,2\n125,1\n");
    }

    proptest! {
        #[test]
        fn signal_csv_round_trips(values in prop::collection::vec(-1e12f64..1e12, 1..50), fs in 1.0f64..1e5) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.csv");
            let x = TimeSignal::new(values, fs);
            write_signal_csv(&p, &x).unwrap();
            prop_assert_eq!(read_signal(&p, None).unwrap(), x);
        }
    }
}
