//! Grid syntax shared by the commands:
//!
//! - `a,b,c`               explicit comma-separated values
//! - `linspace:a:b:count`  `count` evenly spaced values from `a` to `b`
//! - `logspace:a:b:count`  `count` log-spaced values from `a` to `b` (both > 0)

pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    if let Some(rest) = spec.strip_prefix("linspace:") {
        let (a, b, count) = parse_range(rest)?;
        return Ok(linspace(a, b, count));
    }
    if let Some(rest) = spec.strip_prefix("logspace:") {
        let (a, b, count) = parse_range(rest)?;
        if a <= 0.0 || b <= 0.0 {
            return Err("logspace endpoints must be positive".into());
        }
        return Ok(linspace(a.log10(), b.log10(), count)
            .into_iter()
            .map(|e| 10f64.powf(e))
            .collect());
    }
    let values: Result<Vec<f64>, _> = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>())
        .collect();
    let values = values.map_err(|e| format!("bad grid value in {spec:?}: {e}"))?;
    if values.is_empty() {
        return Err(format!("empty grid {spec:?}"));
    }
    Ok(values)
}

fn parse_range(rest: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = rest.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:stop:count, got {rest:?}"));
    }
    let a: f64 = parts[0].parse().map_err(|e| format!("bad start: {e}"))?;
    let b: f64 = parts[1].parse().map_err(|e| format!("bad stop: {e}"))?;
    let count: usize = parts[2].parse().map_err(|e| format!("bad count: {e}"))?;
    if count == 0 {
        return Err("grid count must be at least 1".into());
    }
    Ok((a, b, count))
}

fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    (0..count)
        .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
        .collect()
}

pub fn parse_list_f64(spec: &str) -> Result<Vec<f64>, String> {
    parse_grid(spec)
}

pub fn parse_list_usize(spec: &str) -> Result<Vec<usize>, String> {
    let values: Result<Vec<usize>, _> = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<usize>())
        .collect();
    let values = values.map_err(|e| format!("bad integer in {spec:?}: {e}"))?;
    if values.is_empty() {
        return Err(format!("empty list {spec:?}"));
    }
    Ok(values)
}
