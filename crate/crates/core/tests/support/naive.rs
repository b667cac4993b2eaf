//! Naive re-implementation of decomposition similarity used as a test oracle.
//!
//! Shares no code with the library: interval lengths are found by counting
//! unit cells and integer steps, and cosine similarity works on exact token
//! count maps instead of hashed buckets.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

/// `(start, end, description)`
pub type Item = (u64, u64, String);

fn cells(a: &Item) -> BTreeSet<u64> {
    (a.0..a.1).collect()
}

pub fn naive_iou(a: &Item, b: &Item) -> f64 {
    if a.0 == a.1 && b.0 == b.1 {
        return if a.0 == b.0 { 1.0 } else { 0.0 };
    }
    let (ca, cb) = (cells(a), cells(b));
    let inter = ca.intersection(&cb).count();
    if inter == 0 {
        return 0.0;
    }
    let union = ca.union(&cb).count();
    inter as f64 / union as f64
}

pub fn naive_weight(a: &Item, b: &Item, k: u64) -> f64 {
    let shared = (0..=k.max(a.1).max(b.1))
        .filter(|t| (a.0..=a.1).contains(t) && (b.0..=b.1).contains(t))
        .count();
    shared as f64 / k as f64
}

fn counts(text: &str) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    let lower = text.to_lowercase();
    let mut token = String::new();
    for c in lower.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            token.push(c);
        } else if !token.is_empty() {
            *m.entry(std::mem::take(&mut token)).or_insert(0.0) += 1.0;
        }
    }
    m
}

pub fn naive_cosine(a: &str, b: &str) -> f64 {
    let (ca, cb) = (counts(a), counts(b));
    let dot: f64 = ca.iter().map(|(t, x)| x * cb.get(t).copied().unwrap_or(0.0)).sum();
    let na: f64 = ca.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = cb.values().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// `(tau_k, tau_zeta)`
pub fn naive_similarity(s: &[Item], p: &[Item]) -> (f64, f64) {
    let k = s.iter().chain(p).map(|x| x.1).max().unwrap_or(0).max(1);
    let (mut num_k, mut num_z, mut den) = (0.0, 0.0, 0.0);
    for a in s {
        for b in p {
            let iou = naive_iou(a, b);
            if iou > 0.0 {
                let w = naive_weight(a, b, k);
                num_k += iou * w;
                num_z += naive_cosine(&a.2, &b.2) * w;
                den += w;
            }
        }
    }
    if den == 0.0 {
        (0.0, 0.0)
    } else {
        (num_k / den, num_z / den)
    }
}
