pub mod asymptotics;
pub mod geometry;
pub mod oracle;
pub mod potentials;
pub mod quadrature;
pub mod specfun;
