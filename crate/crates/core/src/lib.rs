pub mod asymptotics;
pub mod error;
pub mod euler_maclaurin;
pub mod kernel;
pub mod measures;
pub mod poly;
pub mod polytope;
pub mod region;
pub mod sum;
pub mod quadrature;
