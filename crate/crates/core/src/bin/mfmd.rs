use std::process::ExitCode;

use mfmd::cli::{execute, parse_invocation, Invocation};

fn main() -> ExitCode {
    let cfg = match parse_invocation(std::env::args_os()) {
        Ok(Invocation::Run(cfg)) => cfg,
        Ok(Invocation::Info(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&e),
    };
    let out = match execute(&cfg) {
        Ok(out) => out,
        Err(e) => return fail(&e),
    };
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    if let Err(e) = out.write_to(&cfg.output) {
        return fail(&e);
    }
    for (name, _) in &out.files {
        eprintln!("wrote {}", cfg.output.join(name).display());
    }
    ExitCode::SUCCESS
}

fn fail(e: &mfmd::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
