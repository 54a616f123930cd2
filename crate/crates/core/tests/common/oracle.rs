//! Independent floating-point model of one nonce trial, written from the
//! algorithm description only. Used to cross-check the integer pipeline.

pub struct Splitmix(pub u64);

impl Splitmix {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
}

pub struct Memory {
    pub ids: Vec<Vec<f64>>,
    pub levels: Vec<Vec<f64>>,
}

pub fn memory(nonce: u32, d: usize, m: usize, l: usize) -> Memory {
    let mut rng = Splitmix(nonce as u64);
    let mut draw = || -> Vec<f64> {
        (0..d)
            .map(|_| if rng.next() & 1 == 1 { 1.0 } else { -1.0 })
            .collect()
    };
    let ids: Vec<Vec<f64>> = (0..m).map(|_| draw()).collect();
    let mut levels = vec![draw()];
    let f = d / (2 * (l - 1));
    for i in 1..l {
        let mut next = levels[i - 1].clone();
        for x in &mut next[(i - 1) * f..i * f] {
            *x = -*x;
        }
        levels.push(next);
    }
    Memory { ids, levels }
}

pub fn bounds(train: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let m = train[0].len();
    (0..m)
        .map(|j| {
            train.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r[j]), hi.max(r[j]))
            })
        })
        .collect()
}

pub fn level(v: f64, (lo, hi): (f64, f64), l: usize) -> usize {
    if hi <= lo || v.is_nan() {
        return 0;
    }
    let q = ((v - lo) / (hi - lo) * l as f64).floor();
    if q < 0.0 {
        0
    } else {
        (q as usize).min(l - 1)
    }
}

pub fn encode(row: &[f64], mem: &Memory, b: &[(f64, f64)], l: usize) -> Vec<f64> {
    let d = mem.ids[0].len();
    let mut out = vec![0.0; d];
    for (j, &v) in row.iter().enumerate() {
        let lv = &mem.levels[level(v, b[j], l)];
        for i in 0..d {
            out[i] += mem.ids[j][i] * lv[i];
        }
    }
    out
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return f64::NEG_INFINITY;
    }
    dot / (na * nb)
}

pub struct Model {
    pub classes: Vec<Vec<f64>>,
    pub predictions: Vec<usize>,
}

/// Trains on `train` and predicts every row of `test`. Ties within 1e-12 go
/// to the lower class.
pub fn model(nonce: u32, d: usize, l: usize, k: usize, train: &[Vec<f64>], train_y: &[u32], test: &[Vec<f64>]) -> Model {
    let m = train[0].len();
    let mem = memory(nonce, d, m, l);
    let b = bounds(train);
    let mut classes = vec![vec![0.0; d]; k];
    for (row, &y) in train.iter().zip(train_y) {
        let e = encode(row, &mem, &b, l);
        for (c, x) in classes[y as usize].iter_mut().zip(e) {
            *c += x;
        }
    }
    let predictions = test
        .iter()
        .map(|row| {
            let q = encode(row, &mem, &b, l);
            let mut best = 0;
            let mut best_s = f64::NEG_INFINITY;
            for (c, hv) in classes.iter().enumerate() {
                let s = cosine(&q, hv);
                if s > best_s + 1e-12 {
                    best = c;
                    best_s = s;
                }
            }
            best
        })
        .collect();
    Model { classes, predictions }
}

/// Test accuracy as `(correct, total)`.
#[allow(clippy::too_many_arguments)]
pub fn trial(
    nonce: u32,
    d: usize,
    l: usize,
    k: usize,
    train: &[Vec<f64>],
    train_y: &[u32],
    test: &[Vec<f64>],
    test_y: &[u32],
) -> (u32, u32) {
    let out = model(nonce, d, l, k, train, train_y, test);
    let correct = out.predictions.iter().zip(test_y).filter(|(p, y)| **p as u32 == **y).count();
    (correct as u32, test.len() as u32)
}
