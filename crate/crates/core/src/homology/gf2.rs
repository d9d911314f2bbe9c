//! Sparse column arithmetic over Z/2.

/// Symmetric difference of two ascending index lists.
pub fn xor_into(target: &mut Vec<u32>, other: &[u32], scratch: &mut Vec<u32>) {
    scratch.clear();
    let (mut i, mut j) = (0, 0);
    while i < target.len() && j < other.len() {
        match target[i].cmp(&other[j]) {
            std::cmp::Ordering::Less => {
                scratch.push(target[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                scratch.push(other[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    scratch.extend_from_slice(&target[i..]);
    scratch.extend_from_slice(&other[j..]);
    std::mem::swap(target, scratch);
}

/// Rank over Z/2 of a matrix given by ascending column supports.
///
/// Left-to-right reduction by lowest-row pivots.
pub fn rank(columns: Vec<Vec<u32>>, rows: usize) -> usize {
    let mut pivot_col: Vec<u32> = vec![u32::MAX; rows];
    let mut reduced: Vec<Vec<u32>> = Vec::with_capacity(columns.len());
    let mut scratch = Vec::new();
    let mut rank = 0;
    for mut col in columns {
        while let Some(&low) = col.last() {
            let p = pivot_col[low as usize];
            if p == u32::MAX {
                pivot_col[low as usize] = reduced.len() as u32;
                rank += 1;
                break;
            }
            xor_into(&mut col, &reduced[p as usize], &mut scratch);
        }
        reduced.push(col);
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_merges() {
        let mut a = vec![1, 3, 5];
        let mut s = Vec::new();
        xor_into(&mut a, &[3, 4], &mut s);
        assert_eq!(a, vec![1, 4, 5]);
    }

    #[test]
    fn rank_of_small_matrices() {
        assert_eq!(rank(vec![], 0), 0);
        assert_eq!(rank(vec![vec![0, 1], vec![1, 2], vec![0, 2]], 3), 2);
        assert_eq!(rank(vec![vec![0], vec![1], vec![2]], 3), 3);
        assert_eq!(rank(vec![vec![], vec![0, 1], vec![0, 1]], 2), 1);
    }
}
