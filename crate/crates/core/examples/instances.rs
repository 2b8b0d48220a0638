//! Instance files: generating, writing, reading back, and importing an
//! SNDlib native topology.

use netplan::network::{
    generate_random_instance, import_sndlib_native, parse_instance, write_instance, DEFAULT_PENALTY,
};

const SNDLIB: &str = "\
?SNDlib native format; type: network; version: 1.0
NODES (
  Paris ( 2.35 48.86 )
  Lyon ( 4.83 45.76 )
  Marseille ( 5.37 43.30 )
  Bordeaux ( -0.58 44.84 )
)
LINKS (
  L1 ( Paris Lyon ) 4.00 0.00 0.00 0.00 ( 10.00 380.00 )
  L2 ( Lyon Marseille ) 2.00 0.00 0.00 0.00 ( 10.00 310.00 )
  L3 ( Paris Bordeaux ) 0.00 0.00 0.00 0.00 ( 10.00 500.00 )
  L4 ( Bordeaux Marseille ) 0.00 0.00 0.00 0.00 ( 10.00 520.00 )
)
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let topology = import_sndlib_native(SNDLIB)?;
    for a in topology.arcs() {
        let nodes = topology.nodes();
        println!(
            "{:<7} {:>9} -> {:<9} u={:<3} c={}",
            a.id, nodes[a.tail], nodes[a.head], a.base_capacity, a.expansion_cost
        );
    }

    // Random commodities and fresh arc costs on the imported topology.
    let inst = generate_random_instance(&topology, 3, 11, DEFAULT_PENALTY)?;
    let text = write_instance(&inst);
    println!("\n{text}");
    assert_eq!(parse_instance(&text)?, inst);
    Ok(())
}
