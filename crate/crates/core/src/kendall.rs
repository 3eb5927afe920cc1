//! Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm).

/// Kendall's tau-b of paired samples. Returns `None` for fewer than two pairs
/// or when either variable is constant.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "paired samples must have equal length");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let pairs = |len: u64| len * (len.saturating_sub(1)) / 2;
    let total = pairs(n as u64);

    // Ties in x, and joint ties in (x, y).
    let (mut tied_x, mut tied_xy) = (0u64, 0u64);
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        tied_x += pairs((j - i) as u64);
        let mut k = i;
        while k < j {
            let mut m = k + 1;
            while m < j && y[idx[m]] == y[idx[k]] {
                m += 1;
            }
            tied_xy += pairs((m - k) as u64);
            k = m;
        }
        i = j;
    }

    // Sorting y (already ordered by x) by merge sort counts discordant swaps.
    let mut ys: Vec<f64> = idx.iter().map(|&k| y[k]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut tied_y = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        tied_y += pairs((j - i) as u64);
        i = j;
    }

    let concordant_minus_discordant =
        total as i128 - tied_x as i128 - tied_y as i128 + tied_xy as i128 - 2 * swaps as i128;
    let denom = (((total - tied_x) as f64) * ((total - tied_y) as f64)).sqrt();
    if denom == 0.0 {
        return None;
    }
    Some(concordant_minus_discordant as f64 / denom)
}

fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = v[i];
        i += 1;
        k += 1;
    }
    while j < n {
        buf[k] = v[j];
        j += 1;
        k += 1;
    }
    v.copy_from_slice(&buf[..n]);
    swaps
}
