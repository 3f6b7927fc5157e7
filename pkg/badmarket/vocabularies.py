import yaml
import pathlib
import os

# Set the directory for yaml files as the root directory + 'config/'
script_dir = pathlib.Path(__file__).parent.absolute()
parent_dir = script_dir.parents[0]
rootdir = parent_dir
config_dir = os.path.join(rootdir, 'config/')

with open(config_dir + 'vocabulary.yaml', 'r') as file:
    _vocabulary = yaml.safe_load(file)

with open(config_dir + 'validation_rules.yaml', 'r') as file:
    validation_rules = yaml.safe_load(file)

with open(config_dir + 'solver_defaults.yaml', 'r') as file:
    solver_defaults = yaml.safe_load(file)

# Family name -> list of required parameter names
family_params = {name: entry['params'] for name, entry in _vocabulary['families'].items()}
families = tuple(family_params)

# Family name -> parameter naming the good the family is strictly increasing in
monotone_in = dict(_vocabulary['monotone_in'])

firm_kinds = tuple(_vocabulary['firm_kinds'])
externality_statistics = tuple(_vocabulary['externality_statistics'])
government_firm_id = _vocabulary['government_firm_id']

# Keys of the economy document
document_keys = ('commodities', 'consumers', 'firms', 'monotone_witnesses')
optional_document_keys = ('metadata',)

# Columns of the family CSV, price columns are inserted after 'n'
family_csv_columns = [
    'n',
    'converged',
    'oracle_gap',
    'ui_share',
    'clearing_residual',
    'worst_budget_violation',
    'worst_optimality_gap',
    'worst_profit_gap',
    'runtime_ms',
    'message',
]


def rule(rule_id):
    """Return the (severity, message template) pair of a validation rule."""
    entry = validation_rules[rule_id]
    return entry['severity'], entry['message']
