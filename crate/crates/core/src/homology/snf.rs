//! Invariant factors of integer matrices (Smith normal form diagonal).
//!
//! Unit pivots are eliminated sparsely first; whatever survives is handed
//! to a dense reduction. All arithmetic is checked.

use std::collections::BTreeSet;

use super::HomologyError;
use crate::cubical::ChainBoundaryMatrix;

fn mul(a: i64, b: i64) -> Result<i64, HomologyError> {
    a.checked_mul(b).ok_or(HomologyError::Overflow)
}

fn sub(a: i64, b: i64) -> Result<i64, HomologyError> {
    a.checked_sub(b).ok_or(HomologyError::Overflow)
}

/// Non-zero invariant factors `d_1 | d_2 | ...`, all positive.
pub fn invariant_factors(m: &ChainBoundaryMatrix) -> Result<Vec<u64>, HomologyError> {
    let mut cols: Vec<Vec<(u32, i64)>> = m
        .columns
        .iter()
        .map(|c| c.iter().copied().filter(|&(_, v)| v != 0).collect())
        .collect();
    let mut row_cols: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); m.rows];
    for (j, col) in cols.iter().enumerate() {
        for &(r, _) in col {
            row_cols[r as usize].insert(j as u32);
        }
    }
    let mut alive = vec![true; cols.len()];
    let mut units = 0usize;
    let mut merged = Vec::new();

    loop {
        let mut progressed = false;
        for c in 0..cols.len() {
            if !alive[c] || cols[c].is_empty() {
                continue;
            }
            // unit entry whose row is shortest (limits fill-in)
            let Some(&(r, u)) = cols[c]
                .iter()
                .filter(|(_, v)| v.abs() == 1)
                .min_by_key(|(r, _)| (row_cols[*r as usize].len(), *r))
            else {
                continue;
            };
            let pivot = std::mem::take(&mut cols[c]);
            let others: Vec<u32> = row_cols[r as usize]
                .iter()
                .copied()
                .filter(|&o| o as usize != c)
                .collect();
            for o in others {
                let o = o as usize;
                let a = cols[o]
                    .iter()
                    .find(|(row, _)| *row == r)
                    .map(|&(_, v)| v)
                    .expect("row index is consistent");
                let factor = mul(a, u)?;
                // cols[o] -= factor * pivot
                merged.clear();
                let (mut i, mut k) = (0, 0);
                let cur = &cols[o];
                while i < cur.len() || k < pivot.len() {
                    let take_cur = k >= pivot.len() || (i < cur.len() && cur[i].0 < pivot[k].0);
                    let take_piv = i >= cur.len() || (k < pivot.len() && pivot[k].0 < cur[i].0);
                    if take_cur {
                        merged.push(cur[i]);
                        i += 1;
                    } else if take_piv {
                        let v = sub(0, mul(factor, pivot[k].1)?)?;
                        merged.push((pivot[k].0, v));
                        row_cols[pivot[k].0 as usize].insert(o as u32);
                        k += 1;
                    } else {
                        let v = sub(cur[i].1, mul(factor, pivot[k].1)?)?;
                        if v != 0 {
                            merged.push((cur[i].0, v));
                        } else {
                            row_cols[cur[i].0 as usize].remove(&(o as u32));
                        }
                        i += 1;
                        k += 1;
                    }
                }
                std::mem::swap(&mut cols[o], &mut merged);
            }
            for &(row, _) in &pivot {
                row_cols[row as usize].remove(&(c as u32));
            }
            debug_assert!(row_cols[r as usize].is_empty());
            alive[c] = false;
            units += 1;
            progressed = true;
        }
        if !progressed {
            break;
        }
    }

    // dense remainder over surviving non-zero rows/columns
    let live_cols: Vec<usize> = (0..cols.len()).filter(|&c| alive[c] && !cols[c].is_empty()).collect();
    let mut live_rows: Vec<u32> = live_cols
        .iter()
        .flat_map(|&c| cols[c].iter().map(|&(r, _)| r))
        .collect();
    live_rows.sort_unstable();
    live_rows.dedup();
    let mut dense = vec![vec![0i64; live_cols.len()]; live_rows.len()];
    for (j, &c) in live_cols.iter().enumerate() {
        for &(r, v) in &cols[c] {
            let i = live_rows.binary_search(&r).expect("row collected");
            dense[i][j] = v;
        }
    }
    let mut factors = vec![1u64; units];
    factors.extend(dense_invariant_factors(dense)?);
    Ok(factors)
}

/// Dense Smith reduction; returns the non-zero diagonal in divisibility order.
pub fn dense_invariant_factors(mut a: Vec<Vec<i64>>) -> Result<Vec<u64>, HomologyError> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut out = Vec::new();
    for t in 0..rows.min(cols) {
        // smallest non-zero magnitude in the trailing block
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if a[i][j] != 0 && best.is_none_or(|(bi, bj)| a[i][j].abs() < a[bi][bj].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((bi, bj)) = best else { break };
        a.swap(t, bi);
        for row in a.iter_mut() {
            row.swap(t, bj);
        }
        loop {
            let mut clean = true;
            for i in t + 1..rows {
                if a[i][t] != 0 {
                    let q = a[i][t] / a[t][t];
                    let (top, bottom) = a.split_at_mut(i);
                    for (x, &p) in bottom[0][t..].iter_mut().zip(&top[t][t..]) {
                        *x = sub(*x, mul(q, p)?)?;
                    }
                    if a[i][t] != 0 {
                        clean = false;
                    }
                }
            }
            for j in t + 1..cols {
                if a[t][j] != 0 {
                    let q = a[t][j] / a[t][t];
                    for row in a[t..].iter_mut() {
                        row[j] = sub(row[j], mul(q, row[t])?)?;
                    }
                    if a[t][j] != 0 {
                        clean = false;
                    }
                }
            }
            if !clean {
                // move the smallest remainder in row/column t onto the pivot
                let mut bi = t;
                let mut bj = t;
                for i in t + 1..rows {
                    if a[i][t] != 0 && a[i][t].abs() < a[bi][bj].abs() {
                        (bi, bj) = (i, t);
                    }
                }
                for j in t + 1..cols {
                    if a[t][j] != 0 && a[t][j].abs() < a[bi][bj].abs() {
                        (bi, bj) = (t, j);
                    }
                }
                a.swap(t, bi);
                for row in a.iter_mut() {
                    row.swap(t, bj);
                }
                continue;
            }
            // pivot must divide the whole trailing block
            let p = a[t][t];
            let offender = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| a[i][j] % p != 0));
            match offender {
                Some(i) => {
                    let (top, bottom) = a.split_at_mut(i);
                    for (x, &y) in top[t][t..].iter_mut().zip(&bottom[0][t..]) {
                        *x = x.checked_add(y).ok_or(HomologyError::Overflow)?;
                    }
                }
                None => break,
            }
        }
        out.push(a[t][t].unsigned_abs());
    }
    Ok(out)
}
