"""Command-line interface wiring the full pipeline: discretize, learn,
average, order, train, evaluate, plus intervention, counterfactual,
sensitivity, attribution, simulation and the HTTP server.

Exit codes: 0 ok, 2 usage, 3 data error, 4 infeasible knowledge,
5 zero-probability query.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import ensemble as ens
from . import explain, metrics, sensitivity
from .cbn import (
    Cbn,
    Dag,
    Knowledge,
    MixedGraph,
    SearchConfig,
    hill_climb,
    model_average,
    read_graph_csv,
    sample_from_cbn,
    tabu_search,
    topological_order,
    write_graph_csv,
)
from .errors import DataError, PcfError
from .ptree import counterfactual as tree_counterfactual
from .ptree import do as tree_do
from .ptree import event_and, prob, prop
from .tabular import (
    Schema,
    builtin_rule_pack,
    discretize as discretize_csv,
    load_csv,
    load_rule_pack,
    oversample,
    rules_schema,
    write_csv,
)


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PcfError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


def _load_schema(schema_path: str | None, rules_path: str | None) -> Schema:
    if schema_path:
        return Schema.from_dict(
            json.loads(Path(schema_path).read_text(encoding="utf-8"))
        )
    if rules_path:
        rules, target = load_rule_pack(rules_path)
    else:
        rules, target = builtin_rule_pack()
    return rules_schema(rules, target)


def _parse_statement(text: str) -> tuple[str, int]:
    if "=" not in text:
        raise DataError(f"expected var=code, got {text!r}")
    var, _, code = text.partition("=")
    try:
        return var.strip(), int(code)
    except ValueError:
        raise DataError(f"code in {text!r} must be an integer") from None


def _parse_edges(text: str) -> frozenset[tuple[str, str]]:
    """Comma-separated `u>v` edge pairs."""
    edges = set()
    for chunk in filter(None, (c.strip() for c in text.split(","))):
        if ">" not in chunk:
            raise DataError(f"expected u>v edge, got {chunk!r}")
        u, _, v = chunk.partition(">")
        edges.add((u.strip(), v.strip()))
    return frozenset(edges)


schema_options = [
    click.option("--schema", "schema_path", type=click.Path(exists=True), default=None,
                 help="Schema JSON file."),
    click.option("--rules", "rules_path", type=click.Path(exists=True), default=None,
                 help="Discretization rule pack (defaults to the bundled clinical pack)."),
]


def _with_schema_options(fn):
    for opt in reversed(schema_options):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Causal discovery and probability-tree prediction toolkit."""


@main.command("discretize")
@click.argument("raw_csv", type=click.Path(exists=True))
@click.argument("out_csv", type=click.Path())
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None)
@_handle_errors
def cmd_discretize(raw_csv, out_csv, rules_path):
    """Bin a raw numeric CSV into labelled categories."""
    if rules_path:
        rules, target = load_rule_pack(rules_path)
    else:
        rules, target = builtin_rule_pack()
    table = discretize_csv(raw_csv, rules, target)
    write_csv(table, out_csv)


@main.command("learn")
@click.argument("data_csv", type=click.Path(exists=True))
@click.argument("out_graph", type=click.Path())
@_with_schema_options
@click.option("--algorithm", type=click.Choice(["hc", "tabu"]), default="hc")
@click.option("--target", default=None, help="Outcome variable (never a parent).")
@click.option("--required", default="", help="Required edges, e.g. 'a>b,c>d'.")
@click.option("--forbidden", default="", help="Forbidden edges, e.g. 'a>b'.")
@click.option("--max-parents", default=4, show_default=True)
@click.option("--restarts", default=0, show_default=True)
@click.option("--tabu-length", default=10, show_default=True)
@click.option("--max-non-improving", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@_handle_errors
def cmd_learn(data_csv, out_graph, schema_path, rules_path, algorithm, target,
              required, forbidden, max_parents, restarts, tabu_length,
              max_non_improving, seed):
    """Learn a network structure from coded data."""
    schema = _load_schema(schema_path, rules_path)
    table = load_csv(data_csv, schema)
    knowledge = Knowledge(
        target=target or schema.target,
        required=_parse_edges(required),
        forbidden=_parse_edges(forbidden),
    )
    config = SearchConfig(
        max_parents=max_parents,
        restarts=restarts,
        seed=seed,
        tabu_length=tabu_length if algorithm == "tabu" else 0,
        max_non_improving=max_non_improving if algorithm == "tabu" else 0,
    )
    search = tabu_search if algorithm == "tabu" else hill_climb
    dag = search(table, knowledge, config)
    write_graph_csv(dag, out_graph)


@main.command("average")
@click.argument("graph_files", nargs=-1, required=True, type=click.Path(exists=True))
@click.argument("out_graph", type=click.Path())
@click.option("--min-frequency", default=1, show_default=True)
@_handle_errors
def cmd_average(graph_files, out_graph, min_frequency):
    """Merge learned graphs by edge-frequency voting into one DAG."""
    loaded = [read_graph_csv(path) for path in graph_files]
    names = sorted({n for g in loaded for n in g.nodes})
    graphs = [
        MixedGraph(nodes=tuple(names), directed=g.directed, undirected=g.undirected)
        for g in loaded
    ]
    write_graph_csv(model_average(graphs, min_frequency), out_graph)


@main.command("order")
@click.argument("graph_file", type=click.Path(exists=True))
@click.option("--target", required=True)
@_handle_errors
def cmd_order(graph_file, target):
    """Print the tree variable order implied by a graph (target last)."""
    mixed = read_graph_csv(graph_file)
    if mixed.undirected:
        raise DataError("ordering needs a fully directed graph")
    nodes = mixed.nodes
    if target not in nodes:
        # an isolated target never shows up in the edge list
        nodes = nodes + (target,)
    dag = Dag(nodes=nodes, edges=mixed.directed)
    click.echo(",".join(topological_order(dag, target)))


@main.command("train")
@click.argument("data_csv", type=click.Path(exists=True))
@click.argument("out_model", type=click.Path())
@_with_schema_options
@click.option("--order", "order_text", default=None,
              help="Comma-separated variable order ending with the target.")
@click.option("--graph", "graph_file", type=click.Path(exists=True), default=None)
@click.option("--target", default=None)
@click.option("--k", default=5, show_default=True)
@click.option("--prune", default=0.0, show_default=True)
@click.option("--tau", default=0.5, show_default=True)
@click.option("--oversample", "oversample_method",
              type=click.Choice(["none", "random", "smote_n", "adasyn_n"]),
              default="none", show_default=True)
@click.option("--seed", default=0, show_default=True)
@_handle_errors
def cmd_train(data_csv, out_model, schema_path, rules_path, order_text,
              graph_file, target, k, prune, tau, oversample_method, seed):
    """Train a tree ensemble from coded data."""
    schema = _load_schema(schema_path, rules_path)
    table = load_csv(data_csv, schema)
    target = target or schema.target
    if target != schema.target:
        schema = Schema(variables=schema.variables, target=target)
        table = load_csv(data_csv, schema)
    if order_text:
        order = [v.strip() for v in order_text.split(",")]
    elif graph_file:
        mixed = read_graph_csv(graph_file, nodes=schema.names)
        dag = Dag(nodes=mixed.nodes, edges=mixed.directed)
        order = topological_order(dag, target)
    else:
        raise DataError("provide --order or --graph")
    table = oversample(table, oversample_method, seed=seed)
    model = ens.train_ensemble(
        table, order, k=k, pruning_threshold=prune, tau=tau, seed=seed
    )
    ens.save_model(model, out_model)


@main.command("evaluate")
@click.argument("model_file", type=click.Path(exists=True))
@click.argument("test_csv", type=click.Path(exists=True))
@_handle_errors
def cmd_evaluate(model_file, test_csv):
    """Score a model on held-out data; metrics CSV on standard output."""
    model = ens.load_model(model_file)
    table = load_csv(test_csv, model.schema)
    scores, labels = ens.evaluate_rows(model, table)
    truth = table.target_column()
    c = metrics.confusion(labels, truth)
    metrics.write_report_csv(
        [(
            "pcf",
            metrics.accuracy(c),
            metrics.specificity(c),
            metrics.sensitivity(c),
            metrics.auc_roc(scores, truth),
        )],
        sys.stdout,
    )


@main.command("intervene")
@click.argument("model_file", type=click.Path(exists=True))
@click.option("--do", "do_text", multiple=True, required=True,
              help="Intervention var=code (repeatable).")
@click.option("--query", "query_text", required=True, help="Query var=code.")
@_handle_errors
def cmd_intervene(model_file, do_text, query_text):
    """Per-tree and averaged probability of the query under intervention."""
    model = ens.load_model(model_file)
    statements = [_parse_statement(t) for t in do_text]
    query = _parse_statement(query_text)
    click.echo("tree,probability")
    values = []
    for i, tree in enumerate(model.trees):
        current = tree
        for statement in statements:
            current = tree_do(current, prop(tree, statement))
        mass = current.total_mass()
        p = prob(current, prop(tree, query)) / mass if mass > 0 else 0.0
        values.append(p)
        click.echo(f"{i},{p!r}")
    click.echo(f"average,{float(np.mean(values))!r}")


@main.command("counterfactual")
@click.argument("model_file", type=click.Path(exists=True))
@click.option("--factual", "factual_text", multiple=True, required=True,
              help="Observed var=code (repeatable).")
@click.option("--do", "do_text", required=True, help="Intervention var=code.")
@click.option("--query", "query_text", required=True, help="Query var=code.")
@_handle_errors
def cmd_counterfactual(model_file, factual_text, do_text, query_text):
    """Averaged probability the query would hold under the intervention,
    given what was actually observed."""
    model = ens.load_model(model_file)
    factuals = [_parse_statement(t) for t in factual_text]
    statement = _parse_statement(do_text)
    query = _parse_statement(query_text)
    values = []
    for tree in model.trees:
        factual_event = None
        for f in factuals:
            cut = prop(tree, f)
            factual_event = (
                cut if factual_event is None else event_and(tree, factual_event, cut)
            )
        values.append(
            tree_counterfactual(
                tree, factual_event, prop(tree, statement), prop(tree, query)
            )
        )
    click.echo("probability")
    click.echo(repr(float(np.mean(values))))


@main.command("sensitivity")
@click.argument("cbn_file", type=click.Path(exists=True))
@click.option("--target", "target_text", required=True, help="Target var=state.")
@click.option("--evidence", "evidence_text", multiple=True,
              help="Evidence var=code (repeatable).")
@_handle_errors
def cmd_sensitivity(cbn_file, target_text, evidence_text):
    """Ranked one-way parameter sensitivity for a network file."""
    cbn = Cbn.load(cbn_file)
    target = _parse_statement(target_text)
    evidence = dict(_parse_statement(t) for t in evidence_text)
    results = sensitivity.rank_parameters(cbn, target, evidence)
    sensitivity.write_ranking_csv(results, sys.stdout)


@main.command("shap")
@click.argument("model_file", type=click.Path(exists=True))
@click.argument("instances_csv", type=click.Path(exists=True))
@click.option("--background", "background_csv", type=click.Path(exists=True),
              default=None, help="Rows to cluster for the background "
              "(defaults to the instances file).")
@click.option("--background-size", default=explain.DEFAULT_BACKGROUND_K,
              show_default=True)
@click.option("--mode", type=click.Choice(["exact", "sampled"]), default="exact",
              show_default=True)
@click.option("--samples", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@_handle_errors
def cmd_shap(model_file, instances_csv, background_csv, background_size, mode,
             samples, seed):
    """Per-instance feature attributions, CSV on standard output."""
    model = ens.load_model(model_file)
    instances = load_csv(instances_csv, model.schema)
    bg_table = (
        load_csv(background_csv, model.schema) if background_csv else instances
    )
    k = min(background_size, len(np.unique(bg_table.rows, axis=0)))
    background = explain.kmodes_background(bg_table, k, seed=seed)
    click.echo("instance,feature,phi")
    for i in range(instances.n_rows):
        row = {
            name: int(instances.rows[i, j])
            for j, name in enumerate(model.schema.names)
        }
        att = explain.shap_values(
            model, row, background, mode=mode, n_samples=samples, seed=seed
        )
        for feature, phi in zip(att.features, att.phi):
            click.echo(f"{i},{feature},{phi!r}")
        click.echo(f"{i},__base__,{att.base_value!r}")


@main.command("simulate")
@click.argument("cbn_file", type=click.Path(exists=True))
@click.argument("out_csv", type=click.Path())
@click.option("--n", required=True, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--target", default=None)
@_handle_errors
def cmd_simulate(cbn_file, out_csv, n, seed, target):
    """Draw synthetic rows from a network file."""
    cbn = Cbn.load(cbn_file)
    write_csv(sample_from_cbn(cbn, n, seed, target), out_csv)


@main.command("serve")
@click.argument("model_file", type=click.Path(exists=True))
@click.option("--data", "data_csv", type=click.Path(exists=True), default=None,
              help="Training data, needed for reorder-and-retrain.")
@click.option("--cbn", "cbn_file", type=click.Path(exists=True), default=None,
              help="Network file, needed for sensitivity queries.")
@click.option("--bind", default="127.0.0.1:8000", show_default=True)
@_handle_errors
def cmd_serve(model_file, data_csv, cbn_file, bind):
    """Run the HTTP model server."""
    import uvicorn

    from .service import create_app

    model = ens.load_model(model_file)
    train_table = load_csv(data_csv, model.schema) if data_csv else None
    cbn = Cbn.load(cbn_file) if cbn_file else None
    app = create_app(model, train_table=train_table, cbn=cbn,
                     model_path=model_file)
    host, _, port = bind.partition(":")
    uvicorn.run(app, host=host, port=int(port or 8000))


if __name__ == "__main__":
    main()
