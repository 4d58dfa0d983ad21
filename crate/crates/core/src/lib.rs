pub mod adapted;
pub mod fock;
pub mod linalg;
pub mod matrix_calc;
pub mod phase_space;
pub mod qf_martingale;
pub mod weyl_word;
