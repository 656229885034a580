pub mod analytics;
pub mod fock;
pub mod loss;
pub mod optics;
pub mod oracle;
pub mod protocol;
pub mod report;

#[cfg(test)]
mod invariants;
