import sys

from src.s1_aop_frontend import run_parse_process
from src.s2_weaver import run_weave_process
from src.s3_flowgraph import run_cfg_process
from src.s4_kripke_model import run_kripke_process
from src.s6_pipeline import run_check_process
from src.s7_cli import cli_main
from src.utils import configure_logging

if __name__ == "__main__":
    # ----------- With arguments the module is the osm command line
    if len(sys.argv) > 1:
        sys.exit(cli_main(sys.argv[1:]))
    # ----------- Execute the code
    configure_logging(verbose=False)
    # - Step 1: Parse the EHR corpus and collect per-aspect info
    run_parse_process()
    # - Step 2: Weave the aspects statically (advice binding table)
    run_weave_process()
    # - Step 3: Build the control-flow graph of every method
    run_cfg_process()
    # - Step 4: Translate the CFGs into Kripke models
    run_kripke_process()
    # - Step 5: Check the property file and the observed traces, draw the concern graph
    run_check_process()
