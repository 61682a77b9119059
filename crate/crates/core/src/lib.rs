pub mod coordinator;
pub mod exec;
pub mod graph;
pub mod ingest;
pub mod injector;
pub mod kinematics;
pub mod neighborhood;
pub mod rng;
pub mod sample;
pub mod synthesizer;
