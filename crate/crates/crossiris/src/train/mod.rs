//! Training: Adam, batching, the two adversarial loops, scenario
//! drivers, and the loss-weight sweep.

pub mod adam;
pub mod batch;
pub mod cgan;
pub mod cpgan;
pub mod scenario;
pub mod sweep;

pub use adam::Adam;
pub use batch::{aligned_pairs, load_selection, AlignedPair, LoadedStrip, PairSampler};
pub use cgan::{
    run_scenario_2b, s1_task, s2a_task, s2b_tasks, s3_task, train_cgan, translate_image,
    TrainedTranslator, TranslationTask,
};
pub use cpgan::{embedding_audit, train_cpgan, TrainedCoupled};
pub use scenario::{
    cross_database_eval, execute_run, load_coupled, load_translator, save_models, score_baseline,
    score_scenario, train_scenario, ScenarioModels,
};
pub use sweep::{
    coupled_settings, hyperparameter_sweep, sweep_table, translation_settings, write_sweep_csv,
    SweepRow,
};
