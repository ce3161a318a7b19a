//! Reference constants, embedded as literals.

/// Euler's constant gamma.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `e^gamma = 1.78107241799019798...`
pub const EXP_GAMMA: f64 = 1.781_072_417_990_198;

/// `e^-gamma = 0.56145948356688516...`
pub const EXP_NEG_GAMMA: f64 = 0.561_459_483_566_885_1;

/// `6 / pi^2 = 1 / zeta(2) = 0.60792710185402662...`
pub const SIX_OVER_PI_SQUARED: f64 = 0.607_927_101_854_026_7;

/// Absolute slack added to both ends of every certified enclosure.
pub const FLOAT_SLACK: f64 = 1e-10;
