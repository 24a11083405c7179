//! Exponentially scaled modified Bessel functions and the `N1` kernel profile.
//!
//! `i0e(x) = e^{-|x|} I0(x)` and `i1e(x) = e^{-|x|} I1(x)` are evaluated with
//! the Chebyshev expansions from the Cephes library, split at `|x| = 8`.
//! Both stay finite for arbitrarily large arguments, which is what the
//! semigroup kernels need when `r r' / t` is huge at small times.

#![allow(clippy::excessive_precision, clippy::unreadable_literal)]

use crate::{Error, Result};

const I0_LOW: [f64; 30] = [
    -4.4153416464793395E-18,
    3.3307945188222384E-17,
    -2.431279846547955E-16,
    1.715391285555133E-15,
    -1.1685332877993451E-14,
    7.676185498604936E-14,
    -4.856446783111929E-13,
    2.95505266312964E-12,
    -1.726826291441556E-11,
    9.675809035373237E-11,
    -5.189795601635263E-10,
    2.6598237246823866E-9,
    -1.300025009986248E-8,
    6.046995022541919E-8,
    -2.670793853940612E-7,
    1.1173875391201037E-6,
    -4.4167383584587505E-6,
    1.6448448070728896E-5,
    -5.754195010082104E-5,
    1.8850288509584165E-4,
    -5.763755745385824E-4,
    1.6394756169413357E-3,
    -4.324309995050576E-3,
    1.0546460394594998E-2,
    -2.373741480589947E-2,
    4.930528423967071E-2,
    -9.490109704804764E-2,
    1.7162090152220877E-1,
    -3.046826723431984E-1,
    6.767952744094761E-1,
];

const I0_HIGH: [f64; 25] = [
    -7.233180487874754E-18,
    -4.830504485944182E-18,
    4.46562142029676E-17,
    3.461222867697461E-17,
    -2.8276239805165836E-16,
    -3.425485619677219E-16,
    1.7725601330565263E-15,
    3.8116806693526224E-15,
    -9.554846698828307E-15,
    -4.150569347287222E-14,
    1.54008621752141E-14,
    3.8527783827421426E-13,
    7.180124451383666E-13,
    -1.7941785315068062E-12,
    -1.3215811840447713E-11,
    -3.1499165279632416E-11,
    1.1889147107846439E-11,
    4.94060238822497E-10,
    3.3962320257083865E-9,
    2.266668990498178E-8,
    2.0489185894690638E-7,
    2.8913705208347567E-6,
    6.889758346916825E-5,
    3.3691164782556943E-3,
    8.044904110141088E-1,
];

const I1_LOW: [f64; 29] = [
    2.7779141127610464E-18,
    -2.111421214358166E-17,
    1.5536319577362005E-16,
    -1.1055969477353862E-15,
    7.600684294735408E-15,
    -5.042185504727912E-14,
    3.223793365945575E-13,
    -1.9839743977649436E-12,
    1.1736186298890901E-11,
    -6.663489723502027E-11,
    3.625590281552117E-10,
    -1.8872497517228294E-9,
    9.381537386495773E-9,
    -4.445059128796328E-8,
    2.0032947535521353E-7,
    -8.568720264695455E-7,
    3.4702513081376785E-6,
    -1.3273163656039436E-5,
    4.781565107550054E-5,
    -1.6176081582589674E-4,
    5.122859561685758E-4,
    -1.5135724506312532E-3,
    4.156422944312888E-3,
    -1.0564084894626197E-2,
    2.4726449030626516E-2,
    -5.294598120809499E-2,
    1.026436586898471E-1,
    -1.7641651835783406E-1,
    2.5258718644363365E-1,
];

const I1_HIGH: [f64; 25] = [
    7.51729631084210481353E-18,
    4.41434832307170791151E-18,
    -4.65030536848935832153E-17,
    -3.20952592199342395980E-17,
    2.96262899764595013876E-16,
    3.30820231092092828324E-16,
    -1.88035477551078244854E-15,
    -3.81440307243700780478E-15,
    1.04202769841288027642E-14,
    4.27244001671195135429E-14,
    -2.10154184277266431302E-14,
    -4.08355111109219731823E-13,
    -7.19855177624590851209E-13,
    2.03562854414708950722E-12,
    1.41258074366137813316E-11,
    3.25260358301548823856E-11,
    -1.89749581235054123450E-11,
    -5.58974346219658380687E-10,
    -3.83538038596423702205E-9,
    -2.63146884688951950684E-8,
    -2.51223623787020892529E-7,
    -3.88256480887769039346E-6,
    -1.10588938762623716291E-4,
    -9.76109749136146840777E-3,
    7.78576235018280120474E-1,
];

/// Clenshaw recurrence for a Chebyshev series in the Cephes convention.
fn chbevl(x: f64, coeffs: &[f64]) -> f64 {
    let mut b0 = coeffs[0];
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in &coeffs[1..] {
        b2 = b1;
        b1 = b0;
        b0 = x * b1 - b2 + c;
    }
    0.5 * (b0 - b2)
}

/// `e^{-|x|} I0(x)`.
pub fn i0e(x: f64) -> f64 {
    let ax = libm::fabs(x);
    if ax <= 8.0 {
        chbevl(0.5 * ax - 2.0, &I0_LOW)
    } else {
        chbevl(32.0 / ax - 2.0, &I0_HIGH) / libm::sqrt(ax)
    }
}

/// `e^{-|x|} I1(x)`. Odd in `x`.
pub fn i1e(x: f64) -> f64 {
    let ax = libm::fabs(x);
    let v = if ax <= 8.0 {
        chbevl(0.5 * ax - 2.0, &I1_LOW) * ax
    } else {
        chbevl(32.0 / ax - 2.0, &I1_HIGH) / libm::sqrt(ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// Radial profile of the `S1` kernel:
/// `N1(tau) = sqrt(pi/tau) e^{-s} I1(s)` with `s = 1/(2 tau)`.
///
/// Values lie in `(0, 1]`, tend to 1 as `tau -> 0` and decay like
/// `(sqrt(pi)/4) tau^{-3/2}` for large `tau`.
pub fn n1_profile(tau: f64) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::NonPositiveArgument(tau));
    }
    let s = 0.5 / tau;
    Ok(libm::sqrt(core::f64::consts::PI / tau) * i1e(s))
}
