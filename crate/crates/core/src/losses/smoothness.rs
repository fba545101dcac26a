use crate::losses::LossValueGrad;
use crate::volume::DisplacementField;

/// Mean over voxels of the squared forward differences of every component
/// along every axis. Differences that would leave the grid are omitted.
pub fn smoothness_loss(field: &DisplacementField) -> LossValueGrad<[f64; 3]> {
    let dims = field.dims();
    let v = field.vectors();
    let n = dims.len() as f64;
    let extent = dims.as_array();
    let mut value = 0.0;
    let mut grad = vec![[0.0; 3]; v.len()];
    for i in 0..v.len() {
        let (x, y, z) = dims.coords(i);
        let at = [x, y, z];
        for axis in 0..3 {
            if at[axis] + 1 >= extent[axis] {
                continue;
            }
            let j = i + dims.stride(axis);
            for c in 0..3 {
                let d = v[j][c] - v[i][c];
                value += d * d;
                grad[j][c] += 2.0 * d / n;
                grad[i][c] -= 2.0 * d / n;
            }
        }
    }
    LossValueGrad {
        value: value / n,
        grad,
    }
}
