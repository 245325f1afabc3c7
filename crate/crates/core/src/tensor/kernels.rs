// Slice-level matrix products shared by forward and backward passes.
// All routines accumulate into `out`.

/// out[m,n] += a[m,k] · b[k,n]
pub(crate) fn mm_nn(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for t in 0..k {
            let av = a[i * k + t];
            let brow = &b[t * n..(t + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// out[m,n] += a[m,k] · b[n,k]ᵀ
pub(crate) fn mm_nt(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let dot: f64 = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
            out[i * n + j] += dot;
        }
    }
}

/// out[m,n] += a[k,m]ᵀ · b[k,n]
pub(crate) fn mm_tn(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for t in 0..k {
        let brow = &b[t * n..(t + 1) * n];
        for i in 0..m {
            let av = a[t * m + i];
            let row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// Maps every flat input index to its flat index after reducing `axes`.
/// Returns the reduced shape (`[1]` when every axis is reduced) and the map.
pub(crate) fn reduction_map(shape: &[usize], axes: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let kept: Vec<usize> = (0..shape.len()).filter(|a| !axes.contains(a)).collect();
    let out_shape: Vec<usize> = if kept.is_empty() {
        vec![1]
    } else {
        kept.iter().map(|&a| shape[a]).collect()
    };
    let n: usize = shape.iter().product();
    let mut map = Vec::with_capacity(n);
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..n {
        let mut flat = 0;
        for &a in &kept {
            flat = flat * shape[a] + idx[a];
        }
        map.push(flat);
        for ax in (0..shape.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    (out_shape, map)
}
