"""
异常定义 - 每类错误对应一个命令行退出码
"""


class MtmcError(Exception):
    """所有可预期错误的基类"""
    exit_code = 3


class ConfigError(MtmcError):
    """配置 / 用法错误"""
    exit_code = 1


class DataError(MtmcError):
    """输入数据错误（文件缺失、解析失败、帧序错误等）"""
    exit_code = 2


class InvariantError(MtmcError):
    """内部不变量被破坏"""
    exit_code = 3


class DivergenceError(InvariantError):
    """训练或梯度计算得到非有限的损失"""
