//! Plain-text file formats.
//!
//! * `PHASE v1` phase profiles:
//!   `PHASE v1 linear sx sy off`, or `PHASE v1 sampled nx ny x0 y0 dx dy`
//!   followed by `ny` rows of `nx` values (rad).
//! * `GIFRAME v1` ghost images, one file per channel: `GIFRAME v1 nx ny`,
//!   a descriptor `theta_s=<rad>|INF theta_i=<rad> channel=+|-`, then `ny`
//!   rows of `nx` counts.
//! * Event logs: `trial_id bucket readout channel bin_x bin_y noise`, one
//!   line per bucket-click trial; a frame without a count has channel 0 and
//!   bins -1.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kspace::SampledPhase as Sampled;
use crate::measurement::Channel;
use crate::montecarlo::{FrameSet, IdlerHit, TrialEvent};
use crate::{Grid, PhaseProfile, Setting};

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| Error::parse(line, format!("cannot parse {what} from {tok:?}")))
}

pub fn write_phase(p: &PhaseProfile) -> String {
    match p {
        PhaseProfile::Linear { slope_x, slope_y, offset } => format!("PHASE v1 linear {slope_x} {slope_y} {offset}\n"),
        PhaseProfile::Sampled(s) => {
            let mut out = format!("PHASE v1 sampled {} {} {} {} {} {}\n", s.nx, s.ny, s.x0, s.y0, s.dx, s.dy);
            for row in s.values.chunks(s.nx) {
                let r: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.push_str(&r.join(" "));
                out.push('\n');
            }
            out
        }
    }
}

pub fn parse_phase(text: &str) -> Result<PhaseProfile> {
    let mut it = lines(text);
    let (ln, header) = it.next().ok_or_else(|| Error::parse(1, "empty phase file"))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("PHASE") || tok.next() != Some("v1") {
        return Err(Error::parse(ln, "expected header 'PHASE v1'"));
    }
    let profile = match tok.next() {
        Some("linear") => {
            let sx = num(tok.next(), ln, "slope_x")?;
            let sy = num(tok.next(), ln, "slope_y")?;
            let off = num(tok.next(), ln, "offset")?;
            if let Some((l, _)) = it.next() {
                return Err(Error::parse(l, "unexpected data after a linear profile"));
            }
            PhaseProfile::linear(sx, sy, off)
        }
        Some("sampled") => {
            let nx: usize = num(tok.next(), ln, "nx")?;
            let ny: usize = num(tok.next(), ln, "ny")?;
            let x0 = num(tok.next(), ln, "x0")?;
            let y0 = num(tok.next(), ln, "y0")?;
            let dx = num(tok.next(), ln, "dx")?;
            let dy = num(tok.next(), ln, "dy")?;
            let values = read_rows(&mut it, nx, ny, ln)?;
            PhaseProfile::Sampled(Sampled::new(nx, ny, x0, y0, dx, dy, values).map_err(|e| Error::parse(ln, e.to_string()))?)
        }
        other => return Err(Error::parse(ln, format!("unknown profile kind {other:?}"))),
    };
    if tok.next().is_some() {
        return Err(Error::parse(ln, "trailing tokens in header"));
    }
    profile.validate().map_err(|e| Error::parse(ln, e.to_string()))?;
    Ok(profile)
}

fn read_rows<'a, T: std::str::FromStr>(
    it: &mut impl Iterator<Item = (usize, &'a str)>,
    nx: usize,
    ny: usize,
    header_line: usize,
) -> Result<Vec<T>> {
    let mut values = Vec::with_capacity(nx * ny);
    let mut last = header_line;
    for _ in 0..ny {
        let (l, row) = it.next().ok_or_else(|| Error::parse(last + 1, format!("expected {ny} data rows")))?;
        let before = values.len();
        for t in row.split_whitespace() {
            values.push(num(Some(t), l, "value")?);
        }
        if values.len() - before != nx {
            return Err(Error::parse(l, format!("expected {nx} values, found {}", values.len() - before)));
        }
        last = l;
    }
    if let Some((l, _)) = it.next() {
        return Err(Error::parse(l, "unexpected extra row"));
    }
    Ok(values)
}

fn descriptor(setting: &Setting, channel: Channel) -> String {
    format!("{setting} channel={}", channel.symbol())
}

/// One channel of a frame set.
pub fn write_frame(frames: &FrameSet, channel: Channel) -> String {
    write_counts(frames.grid.nx, frames.grid.ny, &frames.setting, channel, frames.counts(channel).iter().map(|&c| c as u64))
}

pub fn write_counts(nx: usize, ny: usize, setting: &Setting, channel: Channel, counts: impl IntoIterator<Item = u64>) -> String {
    let mut out = format!("GIFRAME v1 {nx} {ny}\n{}\n", descriptor(setting, channel));
    let counts: Vec<u64> = counts.into_iter().collect();
    for row in counts.chunks(nx.max(1)).take(ny) {
        for (i, c) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{c}");
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedFrame {
    pub nx: usize,
    pub ny: usize,
    pub setting: Setting,
    pub channel: Channel,
    pub counts: Vec<u64>,
}

fn parse_angle(v: &str, line: usize, key: &str) -> Result<f64> {
    let a: f64 = v.parse().map_err(|_| Error::parse(line, format!("cannot parse {key} from {v:?}")))?;
    if !a.is_finite() {
        return Err(Error::parse(line, format!("{key} must be finite")));
    }
    Ok(a)
}

pub fn parse_frame(text: &str) -> Result<ParsedFrame> {
    let mut it = lines(text);
    let (ln, header) = it.next().ok_or_else(|| Error::parse(1, "empty frame file"))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("GIFRAME") || tok.next() != Some("v1") {
        return Err(Error::parse(ln, "expected header 'GIFRAME v1'"));
    }
    let nx: usize = num(tok.next(), ln, "nx")?;
    let ny: usize = num(tok.next(), ln, "ny")?;
    if nx == 0 || ny == 0 || tok.next().is_some() {
        return Err(Error::parse(ln, "header must be 'GIFRAME v1 nx ny' with nx, ny >= 1"));
    }
    let (dl, desc) = it.next().ok_or_else(|| Error::parse(ln + 1, "missing setting descriptor"))?;
    let (mut ts, mut ti, mut ch) = (None, None, None);
    for kv in desc.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::parse(dl, format!("expected key=value, got {kv:?}")))?;
        match k {
            "theta_s" => ts = Some(if v == "INF" { None } else { Some(parse_angle(v, dl, k)?) }),
            "theta_i" => ti = Some(parse_angle(v, dl, k)?),
            "channel" => {
                ch = Some(match v {
                    "+" => Channel::Plus,
                    "-" => Channel::Minus,
                    _ => return Err(Error::parse(dl, format!("channel must be + or -, got {v:?}"))),
                })
            }
            _ => return Err(Error::parse(dl, format!("unknown descriptor key {k:?}"))),
        }
    }
    let (Some(ts), Some(ti), Some(channel)) = (ts, ti, ch) else {
        return Err(Error::parse(dl, "descriptor needs theta_s, theta_i and channel"));
    };
    let setting = match ts {
        Some(t) => Setting::new(t, ti),
        None => Setting::marginal(ti),
    };
    let counts = read_rows(&mut it, nx, ny, dl)?;
    Ok(ParsedFrame { nx, ny, setting, channel, counts })
}

/// Reassembles a frame set from its `+` and `−` files.
pub fn frame_set_from_files(plus: &ParsedFrame, minus: &ParsedFrame, half_width: f64) -> Result<FrameSet> {
    if plus.channel != Channel::Plus || minus.channel != Channel::Minus {
        return Err(Error::invalid("expected one '+' and one '-' frame"));
    }
    if (plus.nx, plus.ny) != (minus.nx, minus.ny) {
        return Err(Error::invalid(format!(
            "frame shapes differ: {}x{} vs {}x{}",
            plus.nx, plus.ny, minus.nx, minus.ny
        )));
    }
    if plus.setting != minus.setting {
        return Err(Error::invalid(format!("frame settings differ: {} vs {}", plus.setting, minus.setting)));
    }
    let grid = Grid::new(plus.nx, plus.ny, half_width)?;
    let narrow = |v: &[u64]| -> Result<Vec<u32>> {
        v.iter().map(|&c| u32::try_from(c).map_err(|_| Error::invalid(format!("count {c} exceeds the bin range")))).collect()
    };
    let mut fs = FrameSet::empty(plus.setting, grid);
    fs.plus = narrow(&plus.counts)?;
    fs.minus = narrow(&minus.counts)?;
    Ok(fs)
}

pub fn write_events(events: &[TrialEvent]) -> String {
    let mut out = String::with_capacity(events.len() * 24);
    for e in events {
        let (ch, bx, by, noise) = match e.hit {
            Some(h) => (h.channel.sign() as i32, h.bin_x as i64, h.bin_y as i64, h.is_noise as u8),
            None => (0, -1, -1, 0),
        };
        let _ = writeln!(out, "{} {} {} {} {} {} {}", e.trial_id, e.bucket_click as u8, e.readout_performed as u8, ch, bx, by, noise);
    }
    out
}

pub fn parse_events(text: &str) -> Result<Vec<TrialEvent>> {
    lines(text)
        .map(|(l, line)| {
            let mut t = line.split_whitespace();
            let trial_id: u64 = num(t.next(), l, "trial_id")?;
            let bucket: u8 = num(t.next(), l, "bucket")?;
            let readout: u8 = num(t.next(), l, "readout")?;
            let ch: i32 = num(t.next(), l, "channel")?;
            let bx: i64 = num(t.next(), l, "bin_x")?;
            let by: i64 = num(t.next(), l, "bin_y")?;
            let noise: u8 = num(t.next(), l, "noise")?;
            if bucket > 1 || readout > 1 || noise > 1 || t.next().is_some() {
                return Err(Error::parse(l, "malformed event line"));
            }
            let hit = match ch {
                0 => None,
                1 | -1 => Some(IdlerHit {
                    bin_x: u32::try_from(bx).map_err(|_| Error::parse(l, "bin_x out of range"))?,
                    bin_y: u32::try_from(by).map_err(|_| Error::parse(l, "bin_y out of range"))?,
                    channel: if ch == 1 { Channel::Plus } else { Channel::Minus },
                    is_noise: noise == 1,
                }),
                _ => return Err(Error::parse(l, "channel must be +1, -1 or 0")),
            };
            Ok(TrialEvent { trial_id, bucket_click: bucket == 1, readout_performed: readout == 1, hit })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_phase_round_trip() {
        let p = PhaseProfile::linear(0.1, -0.45, 3.0);
        assert_eq!(parse_phase(&write_phase(&p)).unwrap(), p);
    }

    #[test]
    fn sampled_phase_round_trip_is_exact() {
        let g = Grid::new(3, 2, 1.5).unwrap();
        let s = Sampled::from_grid(&g, |k| 0.1 * k.kx + (1.0 / 3.0) * k.ky).unwrap();
        let p = PhaseProfile::Sampled(s);
        assert_eq!(parse_phase(&write_phase(&p)).unwrap(), p);
    }

    #[test]
    fn phase_errors_carry_line_numbers() {
        let e = parse_phase("PHASE v1 sampled 2 2 0 0 1 1\n1 2\n3\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        assert!(matches!(parse_phase("PHASE v2 linear 0 0 0"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn frame_round_trip() {
        let g = Grid::new(3, 2, 25.0).unwrap();
        let mut fs = FrameSet::empty(Setting::marginal(std::f64::consts::FRAC_PI_2), g);
        fs.plus = vec![1, 2, 3, 4, 5, 6];
        fs.minus = vec![0, 0, 7, 0, 0, 1];
        let p = parse_frame(&write_frame(&fs, Channel::Plus)).unwrap();
        let m = parse_frame(&write_frame(&fs, Channel::Minus)).unwrap();
        assert_eq!(p.setting, fs.setting);
        let back = frame_set_from_files(&p, &m, 25.0).unwrap();
        assert_eq!(back.plus, fs.plus);
        assert_eq!(back.minus, fs.minus);
        assert!(write_frame(&fs, Channel::Minus).starts_with("GIFRAME v1 3 2\ntheta_s=INF theta_i=1.5707963267948966 channel=-\n"));
    }

    #[test]
    fn mismatched_frames_rejected() {
        let a = parse_frame("GIFRAME v1 1 1\ntheta_s=0 theta_i=0 channel=+\n3\n").unwrap();
        let b = parse_frame("GIFRAME v1 1 1\ntheta_s=1 theta_i=0 channel=-\n3\n").unwrap();
        assert!(frame_set_from_files(&a, &b, 1.0).is_err());
    }

    #[test]
    fn event_round_trip() {
        let ev = vec![
            TrialEvent { trial_id: 3, bucket_click: true, readout_performed: true, hit: None },
            TrialEvent {
                trial_id: 9,
                bucket_click: true,
                readout_performed: true,
                hit: Some(IdlerHit { bin_x: 4, bin_y: 0, channel: Channel::Minus, is_noise: true }),
            },
        ];
        let text = write_events(&ev);
        assert_eq!(text, "3 1 1 0 -1 -1 0\n9 1 1 -1 4 0 1\n");
        assert_eq!(parse_events(&text).unwrap(), ev);
    }
}
