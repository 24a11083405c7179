//! Small quadrature helpers shared by the kernel builders.

/// Five-point Gauss-Legendre nodes on [-1, 1].
const GL_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Composite 5-point Gauss-Legendre on `[a, b]` with pieces no wider than `h`.
pub(crate) fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, h: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let pieces = libm::ceil((b - a) / h).max(1.0) as usize;
    let w = (b - a) / pieces as f64;
    let mut sum = 0.0;
    for p in 0..pieces {
        let mid = a + (p as f64 + 0.5) * w;
        let half = 0.5 * w;
        let mut acc = 0.0;
        for q in 0..5 {
            acc += GL_W[q] * f(mid + half * GL_X[q]);
        }
        sum += acc * half;
    }
    sum
}

/// Mass of the 1D heat kernel `g_s(x) = (4 pi s)^{-1/2} e^{-x^2/4s}` on `[a, b]`.
pub(crate) fn gauss_mass(s: f64, a: f64, b: f64) -> f64 {
    let k = 0.5 / libm::sqrt(s);
    // erfc differences keep precision in the far tails on either side.
    let (a, b) = (a * k, b * k);
    if a >= 0.0 {
        0.5 * (libm::erfc(a) - libm::erfc(b))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b) - libm::erfc(-a))
    } else {
        0.5 * (libm::erf(b) - libm::erf(a))
    }
}

/// 1D heat kernel at time `s`.
pub(crate) fn gauss(s: f64, x: f64) -> f64 {
    libm::exp(-x * x / (4.0 * s)) / libm::sqrt(4.0 * core::f64::consts::PI * s)
}
