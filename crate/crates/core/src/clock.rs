//! Minimal UTC wall-clock arithmetic on epoch seconds.
//!
//! The simulator anchors every series to integer epoch seconds and never
//! needs time zones or leap seconds, so this module implements just the
//! civil-date conversions and the ISO-8601 subset the CSV formats use.

/// Days from 1970-01-01 to the given civil date (proleptic Gregorian).
pub fn days_from_civil(year: i64, month: u32, day: u32) -> i64 {
    let y = if month <= 2 { year - 1 } else { year };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = if month > 2 { month - 3 } else { month + 9 } as i64;
    let doy = (153 * mp + 2) / 5 + day as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146097 + doe - 719468
}

/// Inverse of [`days_from_civil`].
pub fn civil_from_days(days: i64) -> (i64, u32, u32) {
    let z = days + 719468;
    let era = if z >= 0 { z } else { z - 146096 } / 146097;
    let doe = z - era * 146097;
    let yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

/// Epoch seconds for a civil date and time of day (UTC).
pub fn epoch_from_civil(year: i64, month: u32, day: u32, hour: u32, min: u32, sec: u32) -> i64 {
    days_from_civil(year, month, day) * 86_400 + hour as i64 * 3_600 + min as i64 * 60 + sec as i64
}

/// Day of week with Monday = 0 .. Sunday = 6.
pub fn weekday(epoch: i64) -> u32 {
    // 1970-01-01 was a Thursday.
    (epoch.div_euclid(86_400) + 3).rem_euclid(7) as u32
}

pub fn is_weekend(epoch: i64) -> bool {
    weekday(epoch) >= 5
}

/// Hour of day in [0, 24).
pub fn hour_of_day(epoch: i64) -> u32 {
    epoch.rem_euclid(86_400) as u32 / 3_600
}

/// Parses either integer epoch seconds or an ISO-8601 UTC timestamp of the
/// form `YYYY-MM-DD[T ]HH:MM[:SS][Z]`.
pub fn parse_timestamp(text: &str) -> Result<i64, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty timestamp".to_string());
    }
    if s.bytes()
        .enumerate()
        .all(|(i, b)| b.is_ascii_digit() || (i == 0 && b == b'-'))
    {
        return s.parse::<i64>().map_err(|e| e.to_string());
    }
    let s = s.strip_suffix('Z').unwrap_or(s);
    let (date, time) = s
        .split_once(['T', ' '])
        .ok_or_else(|| format!("expected ISO-8601 date and time, got {s:?}"))?;
    let mut dp = date.split('-');
    let year: i64 = next_field(&mut dp, "year")?;
    let month: u32 = next_field(&mut dp, "month")?;
    let day: u32 = next_field(&mut dp, "day")?;
    if dp.next().is_some() {
        return Err(format!("malformed date {date:?}"));
    }
    let mut tp = time.split(':');
    let hour: u32 = next_field(&mut tp, "hour")?;
    let min: u32 = next_field(&mut tp, "minute")?;
    let sec: u32 = match tp.next() {
        Some(v) => v.parse().map_err(|_| format!("bad seconds {v:?}"))?,
        None => 0,
    };
    if tp.next().is_some() {
        return Err(format!("malformed time {time:?}"));
    }
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) || hour > 23 || min > 59 || sec > 59 {
        return Err(format!("timestamp field out of range in {s:?}"));
    }
    Ok(epoch_from_civil(year, month, day, hour, min, sec))
}

fn next_field<T: std::str::FromStr>(
    parts: &mut std::str::Split<'_, char>,
    name: &str,
) -> Result<T, String> {
    let raw = parts.next().ok_or_else(|| format!("missing {name}"))?;
    raw.parse().map_err(|_| format!("bad {name} {raw:?}"))
}

/// Formats epoch seconds as `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_timestamp(epoch: i64) -> String {
    let (y, m, d) = civil_from_days(epoch.div_euclid(86_400));
    let sod = epoch.rem_euclid(86_400);
    format!(
        "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
        y,
        m,
        d,
        sod / 3_600,
        (sod % 3_600) / 60,
        sod % 60
    )
}
