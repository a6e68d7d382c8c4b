pub mod archivist;
pub mod auditor;
pub mod authority;
pub mod cost;
pub mod debfeed;
pub mod monitor;
pub mod sim;
