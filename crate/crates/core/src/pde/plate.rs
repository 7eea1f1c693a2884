use std::f64::consts::PI;

/// Truncated double sine series for `−Δu = Q·1_box` on the unit square with
/// zero Dirichlet data.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateSeries {
    modes: usize,
    /// `coef[(m−1)·modes + (n−1)]`
    coef: Vec<f64>,
}

impl PlateSeries {
    pub fn new(q: f64, x_box: (f64, f64), y_box: (f64, f64), modes: usize) -> Self {
        let strip = |k: usize, (a, b): (f64, f64)| {
            let w = k as f64 * PI;
            ((w * a).cos() - (w * b).cos()) / w
        };
        let fx: Vec<f64> = (1..=modes).map(|m| strip(m, x_box)).collect();
        let fy: Vec<f64> = (1..=modes).map(|n| strip(n, y_box)).collect();
        let mut coef = Vec::with_capacity(modes * modes);
        for m in 1..=modes {
            for n in 1..=modes {
                let lambda = PI * PI * ((m * m + n * n) as f64);
                coef.push(4.0 * q * fx[m - 1] * fy[n - 1] / lambda);
            }
        }
        Self { modes, coef }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// `(u, [u_x, u_y], [u_xx, u_yy])` at `(x, y)`.
    pub fn eval_jet(&self, x: f64, y: f64) -> (f64, [f64; 2], [f64; 2]) {
        let n = self.modes;
        let w: Vec<f64> = (1..=n).map(|k| k as f64 * PI).collect();
        let (sx, cx): (Vec<f64>, Vec<f64>) = w.iter().map(|wk| (wk * x).sin_cos()).unzip();
        let (sy, cy): (Vec<f64>, Vec<f64>) = w.iter().map(|wk| (wk * y).sin_cos()).unzip();
        let (mut u, mut ux, mut uy, mut uxx, mut uyy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for m in 0..n {
            let row = &self.coef[m * n..(m + 1) * n];
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for k in 0..n {
                a += row[k] * sy[k];
                b += row[k] * w[k] * cy[k];
                c += row[k] * w[k] * w[k] * sy[k];
            }
            u += sx[m] * a;
            ux += w[m] * cx[m] * a;
            uy += sx[m] * b;
            uxx -= w[m] * w[m] * sx[m] * a;
            uyy -= sx[m] * c;
        }
        (u, [ux, uy], [uxx, uyy])
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let n = self.modes;
        let sy: Vec<f64> = (1..=n).map(|k| (k as f64 * PI * y).sin()).collect();
        let mut u = 0.0;
        for m in 0..n {
            let sx = ((m + 1) as f64 * PI * x).sin();
            let row = &self.coef[m * n..(m + 1) * n];
            u += sx * row.iter().zip(&sy).map(|(c, s)| c * s).sum::<f64>();
        }
        u
    }
}
