use core::f64::consts::{PI, TAU};
use core::fmt;
use core::ops::{Add, Neg, Sub};

/// An angle in radians.
///
/// The stored value is kept as given (so `-π/8` stays negative, which matters
/// for sign resolution in the Malus estimator); [`Angle::canonical`] gives the
/// representative in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);
    pub const QUARTER_TURN: Angle = Angle(PI / 2.0);

    pub const fn from_radians(radians: f64) -> Self {
        Angle(radians)
    }

    pub fn from_degrees(degrees: f64) -> Self {
        Angle(degrees * (PI / 180.0))
    }

    pub const fn radians(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// Representative in `[0, 2π)`.
    pub fn canonical(self) -> Angle {
        let r = libm::fmod(self.0, TAU);
        let r = if r < 0.0 { r + TAU } else { r };
        // fmod of a tiny negative value plus TAU can round up to TAU itself.
        Angle(if r >= TAU { 0.0 } else { r })
    }

    pub fn cos(self) -> f64 {
        libm::cos(self.0)
    }

    pub fn sin(self) -> f64 {
        libm::sin(self.0)
    }
}

impl Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        Angle(self.0 + rhs.0)
    }
}

impl Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        Angle(self.0 - rhs.0)
    }
}

impl Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        Angle(-self.0)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} rad", self.0)
    }
}

/// Malus transmission factor `cos²(setting − pulse_axis)`, in `[0, 1]`.
///
/// Evaluated as `(1 + cos 2Δ) / 2` so that parallel and orthogonal axes give
/// exactly 1 and 0.
pub fn malus_intensity(setting: Angle, pulse_axis: Angle) -> f64 {
    let delta = (setting - pulse_axis).radians();
    (0.5 * (1.0 + libm::cos(2.0 * delta))).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_8;
    use proptest::prelude::*;

    #[test]
    fn parallel_and_orthogonal() {
        assert_eq!(malus_intensity(Angle::ZERO, Angle::ZERO), 1.0);
        assert_eq!(malus_intensity(Angle::QUARTER_TURN, Angle::ZERO), 0.0);
        assert_eq!(malus_intensity(Angle::ZERO, Angle::QUARTER_TURN), 0.0);
    }

    #[test]
    fn eighth_turn_value() {
        // cos²(π/8) = (2 + √2)/4
        let v = malus_intensity(Angle::from_radians(FRAC_PI_8), Angle::ZERO);
        assert!((v - 0.8535533906).abs() < 1e-10, "{v}");
    }

    #[test]
    fn canonical_range() {
        assert_eq!(Angle::from_radians(-PI / 2.0).canonical().radians(), 1.5 * PI);
        assert_eq!(Angle::from_radians(TAU).canonical().radians(), 0.0);
        let tiny = Angle::from_radians(-1e-300).canonical().radians();
        assert!((0.0..TAU).contains(&tiny));
    }

    #[test]
    fn degrees_convert() {
        assert!((Angle::from_degrees(45.0).radians() - PI / 4.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn symmetric_and_pi_periodic(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let (a, b) = (Angle::from_radians(a), Angle::from_radians(b));
            let f = malus_intensity(a, b);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((f - malus_intensity(b, a)).abs() < 1e-12);
            prop_assert!((f - malus_intensity(a + Angle::from_radians(PI), b)).abs() < 1e-12);
        }

        #[test]
        fn complementary_channels_sum_to_one(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let (a, b) = (Angle::from_radians(a), Angle::from_radians(b));
            let sum = malus_intensity(a, b) + malus_intensity(a, b + Angle::QUARTER_TURN);
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn canonical_is_in_range_and_equivalent(a in -100.0f64..100.0) {
            let c = Angle::from_radians(a).canonical();
            prop_assert!((0.0..TAU).contains(&c.radians()));
            prop_assert!((c.cos() - Angle::from_radians(a).cos()).abs() < 1e-9);
            prop_assert!((c.sin() - Angle::from_radians(a).sin()).abs() < 1e-9);
        }
    }
}
