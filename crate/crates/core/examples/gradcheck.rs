//! Runs the finite-difference suite, then repeats it with a deliberately
//! wrong softmax backward rule to show what a failure looks like.

use seizureformer::diagnostics::gradcheck_suite;

fn main() -> seizureformer::Result<()> {
    for r in gradcheck_suite(None)? {
        println!("{}", r.line());
    }
    println!("\nwith the softmax gradient scaled by 1.5:");
    for r in gradcheck_suite(Some(("softmax", 1.5)))?.iter().filter(|r| !r.passed()) {
        println!("{}", r.line());
    }
    Ok(())
}
