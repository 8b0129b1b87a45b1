"""
Multi-Camera Global Association Tracker - Main Entry Point
"""

import os
import sys
import logging
import argparse

from core.errors import MtmcError
from utils.config import RunConfig, load_config


def setup_logging(config: RunConfig, verbose: bool = False):
    """设置日志：控制台输出到 stderr，stdout 只留给报告"""
    level = 'DEBUG' if verbose else config.logging.level
    handlers = [logging.StreamHandler(sys.stderr)]
    if config.logging.file:
        handlers.append(logging.FileHandler(config.logging.file, encoding='utf-8'))

    logging.basicConfig(
        level=getattr(logging, level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def info(message: str):
    """进度提示写到 stderr"""
    print(message, file=sys.stderr)


# ==================== 子命令 ====================

def run_simulate(args, config: RunConfig) -> int:
    from stages.simulate import cmd_simulate

    info("🎬 生成合成场景...")
    written = cmd_simulate(config, args.out or config.paths.output_dir)
    info(f"✅ 真值: {written['gt']}")
    info(f"✅ 检测: {written['det']} (+ {os.path.basename(written['app'])})")
    return 0


def run_train(args, config: RunConfig) -> int:
    from stages.train import cmd_train

    info("🏋️ 训练关联模型...")
    outcome = cmd_train(config, weights_path=args.weights, progress=not args.no_progress)
    info(f"✅ 权重已保存至: {outcome['weights']}")
    info(f"📈 损失曲线: {outcome['loss_curve']}")
    print(f"heldout_initial={outcome['heldout_initial']:.6f}")
    print(f"heldout_final={outcome['heldout_final']:.6f}")
    return 0


def run_track(args, config: RunConfig) -> int:
    from stages.track import cmd_track

    info(f"🚶 跟踪检测文件: {args.detections}")
    outcome = cmd_track(config, args.detections, args.out, weights_path=args.weights,
                        matching_params=args.matching_params)
    info(f"✅ {outcome['trajectories']} 条轨迹已写入: {outcome['pred']}")
    return 0


def run_evaluate(args, config: RunConfig) -> int:
    from stages.evaluate import cmd_evaluate

    report, _ = cmd_evaluate(args.gt, args.pred, config.eval.eval_config(), out_path=args.out)
    print(report, end='')
    return 0


def run_selftest(args, config: RunConfig) -> int:
    from stages.selftest import cmd_selftest

    info("🧪 运行自检...")
    results = cmd_selftest(inject_gradient_fault=args.inject_gradient_fault, quick=args.quick)
    for result in results:
        status = 'PASS' if result.passed else 'FAIL'
        print(f"{result.name}={status} ({result.seconds:.1f}s) {result.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        info(f"❌ 自检失败: {', '.join(failed)}")
        return 3
    info("✅ 全部自检通过")
    return 0


def run_pipeline(args, config: RunConfig) -> int:
    from graph.workflow import run_workflow

    info("🚀 运行完整流水线: simulate -> train -> track -> evaluate")
    info("-" * 50)
    final_state = run_workflow(config, progress=not args.no_progress)
    info("-" * 50)
    info(f"✅ 完成节点: {' -> '.join(final_state['completed_nodes'])}")
    print(final_state['report'], end='')
    return 0


def run_ablate(args, config: RunConfig) -> int:
    from stages.ablate import cmd_ablate

    info(f"🔬 消融: {args.param} = {args.values}")
    cmd_ablate(config, args.param, args.values, matching_params=args.matching_params,
               progress=not args.no_progress)
    return 0


COMMANDS = {
    'simulate': run_simulate,
    'train': run_train,
    'track': run_track,
    'evaluate': run_evaluate,
    'selftest': run_selftest,
    'pipeline': run_pipeline,
    'ablate': run_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Multi-Camera Global Association Tracker')
    parser.add_argument('--config', default='config.yaml', help='Path to config file')
    parser.add_argument('--verbose', action='store_true', help='Log at DEBUG level')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', help='Generate GT and detection track files')
    p.add_argument('--out', help='Output directory (overrides paths.output_dir)')

    p = sub.add_parser('train', help='Train the association model')
    p.add_argument('--weights', help='Weights output path (overrides paths.weights)')
    p.add_argument('--no-progress', action='store_true', help='Hide the progress bar')

    p = sub.add_parser('track', help='Track a detection file')
    p.add_argument('detections', help='Detection track file (with .app.npy sidecar)')
    p.add_argument('--out', required=True, help='Prediction track file')
    p.add_argument('--weights', help='Weights path (overrides paths.weights)')
    p.add_argument('--matching-params', action='store_true',
                   help='Use appearance-matching parameters instead of trained weights')

    p = sub.add_parser('evaluate', help='Compute cross-view metrics')
    p.add_argument('gt', help='GT track file')
    p.add_argument('pred', help='Prediction track file')
    p.add_argument('--out', help='Also write the report to this file')

    p = sub.add_parser('selftest', help='Run the oracle suites')
    p.add_argument('--inject-gradient-fault', action='store_true', help='Check a deliberately wrong gradient')
    p.add_argument('--quick', action='store_true', help='Run fewer instances per suite')

    p = sub.add_parser('pipeline', help='simulate -> train -> track -> evaluate')
    p.add_argument('--no-progress', action='store_true', help='Hide the progress bar')

    p = sub.add_parser('ablate', help='Sweep one parameter')
    p.add_argument('--param', required=True, choices=['window', 'heads', 'd_st'])
    p.add_argument('--values', required=True, type=int, nargs='+')
    p.add_argument('--matching-params', action='store_true',
                   help='Use appearance-matching parameters instead of training')
    p.add_argument('--no-progress', action='store_true', help='Hide the progress bar')
    return parser


def resolve_config(args) -> RunConfig:
    """selftest 与 evaluate 不强制要求配置文件"""
    if args.command in ('selftest', 'evaluate') and not os.path.exists(args.config):
        return RunConfig()
    return load_config(args.config)


def main(argv=None) -> int:
    """主函数，返回退出码"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse 用法错误统一为退出码 1
        return 0 if e.code == 0 else 1

    try:
        config = resolve_config(args)
        setup_logging(config, args.verbose)
        return COMMANDS[args.command](args, config)

    except MtmcError as e:
        print(f"\n❌ 错误: {str(e)}", file=sys.stderr)
        logging.getLogger(__name__).debug("Command failed", exc_info=True)
        return e.exit_code
    except KeyboardInterrupt:
        print("\n\n⚠️ 用户中断", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"\n❌ 内部错误: {str(e)}", file=sys.stderr)
        logging.exception("Command failed")
        return 3


if __name__ == '__main__':
    sys.exit(main())
