use std::process::ExitCode;

fn main() -> ExitCode {
    let results = sweep_tool::acceptance::run_all(|r| println!("{r}"));
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
