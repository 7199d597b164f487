use serde_json::Value;

use crate::config::Command;
use crate::error::CliError;
use crate::output::Output;

mod basic;
mod kinetic;
mod microsim;
mod reduction;

pub struct Ctx {
    pub seed: u64,
    pub out: Output,
}

/// Runs one command; the returned summary goes into the manifest.
pub fn dispatch(command: Command, ctx: &mut Ctx, parameters: &Value) -> Result<Value, CliError> {
    match command {
        Command::Lambda => basic::lambda(ctx, parameters),
        Command::Interaction => basic::interaction(ctx, parameters),
        Command::Regime => basic::regime(ctx, parameters),
        Command::Spectrum => basic::spectrum(ctx, parameters),
        Command::Collision => kinetic::collision(ctx, parameters),
        Command::Evolve => kinetic::evolve(ctx, parameters),
        Command::ScanKz => kinetic::scan_kz(ctx, parameters),
        Command::VerifyReduction => reduction::verify_reduction(ctx, parameters),
        Command::Microsim => microsim::microsim(ctx, parameters),
    }
}
