# This file configures the analysis defaults and the locations and names of key files and folders

class Config(object):
    DEBUG = False
    TESTING = False


class ModelConfig(Config):
    # ------- Analysis defaults ---------
    # Maximum number of nested in-program callees spliced into one CFG (overridden by --inline-depth)
    INLINE_DEPTH_LIMIT = 16
    # Concern identifier standing for the core functionality in configuration formulas
    CORE_CONCERN_ID = "P"
    # Unknown atoms in CTL formulas are warnings unless this is set (overridden by --strict-atoms)
    STRICT_ATOMS = False
    # Version field written into every JSON artifact (Kripke models, reports)
    FORMAT_VERSION = 1
    # File extensions of mini-DSL sources, property files and trace files
    SOURCE_SUFFIX = ".osm"
    PROPS_SUFFIX = ".props"
    TRACE_SUFFIX = ".trace"


class DevConfig(Config):
    # ------- Files and Directories ---------
    DIR_NAME_DATA = "data"
    DIR_NAME_RAW = "0_raw"
    DIR_NAME_INTERIM = "1_interim"
    DIR_NAME_PROCESSED = "2_processed"
    # Name of the folder in 0_raw holding the EHR corpus (.osm files)
    DIR_CORPUS = "ehr_corpus"
    # Name of the property file in 0_raw checked against the corpus
    PROPS_CORPUS = "ehr.props"
    # Name of the folder in 0_raw holding observed execution traces (.trace files)
    DIR_TRACES = "traces"
    # Method whose model the shipped traces were observed on
    TRACE_TARGET = "HealthService.requestHistory"
    INTERIM_CSV_ASPECT_INFO = "aspect_info.csv"
    INTERIM_CSV_BINDINGS = "advice_bindings.csv"
    INTERIM_DIR_CFG = "cfg"
    INTERIM_DIR_KRIPKE = "kripke"
    PROCESSED_JSON_REPORT = "check_report.json"
    PROCESSED_JSON_TRACE_REPORT = "trace_report.json"
    PROCESSED_CSV_TRACE_REPORT = "trace_report.csv"
    PROCESSED_DOT_CONCERN_GRAPH = "concern_graph.dot"
