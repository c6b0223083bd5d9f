//! Brute-force metric reimplementation shared by the metric oracle tests.
//! Loops only, no library code.
#![allow(clippy::needless_range_loop)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Naive {
    pub purity: Option<f64>,
    pub coverage: f64,
    pub compactness: Vec<Option<f64>>,
    pub locality: Vec<Option<f64>>,
    pub crosstalk: Option<f64>,
}

pub fn naive(rows: &[Vec<f64>], eps: f64) -> Naive {
    let n = rows.len();
    let c = rows[0].len();
    let mut active = vec![];
    let mut primary = vec![];
    let mut purity = vec![];
    for row in rows {
        let mut total = 0.0;
        for v in row {
            total += v;
        }
        active.push(total >= 0.01);
        let mut best = 0;
        for j in 0..c {
            if row[j] > row[best] {
                best = j;
            }
        }
        primary.push(best);
        purity.push(row[best] / (total + eps));
    }
    let active_ids: Vec<usize> = (0..n).filter(|&i| active[i]).collect();

    let mean_p = if active_ids.is_empty() {
        None
    } else {
        let mut s = 0.0;
        for &i in &active_ids {
            s += purity[i];
        }
        Some(s / active_ids.len() as f64)
    };

    let mut covered = 0;
    for j in 0..c {
        if active_ids.iter().any(|&i| primary[i] == j) {
            covered += 1;
        }
    }

    let mut comp = vec![];
    let mut loc = vec![];
    for j in 0..c {
        let members: Vec<usize> = active_ids.iter().copied().filter(|&i| rows[i][j] > 0.0).collect();
        if members.is_empty() {
            comp.push(None);
            loc.push(None);
            continue;
        }
        let mut total = 0.0;
        for &i in &members {
            total += rows[i][j];
        }
        let nj = members.len() as f64;
        if members.len() == 1 {
            comp.push(Some(1.0));
        } else {
            let mut h = 0.0;
            for &i in &members {
                h += (rows[i][j] / total) * (rows[i][j] / total);
            }
            comp.push(Some(((h - 1.0 / nj) / (1.0 - 1.0 / nj)).clamp(0.0, 1.0)));
        }
        if n == 1 {
            loc.push(Some(1.0));
        } else {
            let mut mu = 0.0;
            for &i in &members {
                mu += rows[i][j] / total * i as f64;
            }
            let mut mad = 0.0;
            for &i in &members {
                mad += rows[i][j] / total * (i as f64 - mu).abs();
            }
            loc.push(Some((1.0 - mad / ((n as f64 - 1.0) / 2.0)).clamp(0.0, 1.0)));
        }
    }

    let mut num = 0.0;
    let mut den = 0.0;
    for &i in &active_ids {
        let mut total = 0.0;
        for v in &rows[i] {
            total += v;
        }
        num += total * (1.0 - purity[i]);
        den += total;
    }
    Naive {
        purity: mean_p,
        coverage: covered as f64 / c as f64,
        compactness: comp,
        locality: loc,
        crosstalk: if den > 0.0 { Some(num / den) } else { None },
    }
}

pub fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    }
}

pub fn random_rows(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rng.random_range(1..=25);
    let c = rng.random_range(1..=6);
    (0..n)
        .map(|_| {
            (0..c)
                .map(|_| match rng.random_range(0..4) {
                    0 => 0.0,
                    1 => rng.random_range(0.0..0.005),
                    _ => rng.random_range(0.0..1.0),
                })
                .collect()
        })
        .collect()
}
