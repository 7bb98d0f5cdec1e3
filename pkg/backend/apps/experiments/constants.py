"""
实验运行常量定义
职责: 集中管理场景名、运行状态与各场景参数默认值
"""


class Scenario:
    """场景名常量"""
    PROFILE = 'profile'
    TOY_ATTACK = 'toy-attack'
    AES_ATTACK = 'aes-attack'
    COVERT = 'covert'
    DEFENSE = 'defense'
    NOC_SWEEP = 'noc-sweep'
    PREFETCHW_TIMER = 'prefetchw-timer'
    CLASSIFIER = 'classifier'
    LATENCY_MAP = 'latency-map'

    CHOICES = [
        (PROFILE, '地址画像'),
        (TOY_ATTACK, '玩具受害者攻击'),
        (AES_ATTACK, 'AES 末轮密钥恢复'),
        (COVERT, '隐蔽信道'),
        (DEFENSE, '均匀延迟防御'),
        (NOC_SWEEP, '片上网络饱和扫描'),
        (PREFETCHW_TIMER, 'PREFETCHW 计时探针'),
        (CLASSIFIER, '分类器表决'),
        (LATENCY_MAP, '单行延迟地图'),
    ]

    ALL = [name for name, _ in CHOICES]


class RunStatus:
    """运行状态常量"""
    PENDING = 'pending'
    RUNNING = 'running'
    PASSED = 'passed'
    FAILED = 'failed'
    ERROR = 'error'

    CHOICES = [
        (PENDING, '待运行'),
        (RUNNING, '运行中'),
        (PASSED, '检查通过'),
        (FAILED, '检查未通过'),
        (ERROR, '出错'),
    ]

    FINISHED_STATUSES = {PASSED, FAILED, ERROR}


# 各场景参数默认值（内置默认 < 配置文件 scenario_params < 命令行参数）
SCENARIO_DEFAULTS = {
    Scenario.PROFILE: {
        'origin_tile': 0,
        'helper_tile': 1,
        'base': 0x400000,
        'candidates': 256,
        'samples': 1000,
        'min_samples': 1000,
        'quantile_low': 0.25,
        'quantile_high': 0.75,
        'min_agreement': 0.9,
    },
    Scenario.TOY_ATTACK: {
        'victim_tile': 0,
        'helper_tile': 1,
        'n_bits': 10000,
        'reset': 'flush',
        'pair_samples': 1000,
        'min_accuracy': 0.95,
        'min_gap': 40.0,
    },
    Scenario.CLASSIFIER: {
        'training_samples': 100000,
        'rounds': 50,
        'heldout_trials': 10000,
        'vote_grid': [1, 3, 5, 10, 20, 40],
        'near_lines': 2,
        'timer_method': 'shared-poll',
    },
    Scenario.AES_ATTACK: {
        'keys': 20,
        'trials': 4000,
        'trial_grid': [100, 250, 500, 1000, 2000, 4000],
        'training_samples': 100000,
        'rounds': 50,
        'votes': 40,
        'near_lines': 2,
        'word_index': 1,
        'timer_method': 'shared-poll',
    },
    Scenario.COVERT: {
        'bits': 100000,
        'samples_per_bit': 3,
        'sender_tile': 0,
        'receiver_tile': 2,
        'helper_tile': 1,
        'pair_samples': 1000,
        'sweep_sizes': [],
        'sweep_seeds': 3,
        'max_error_rate': 0.0002,
        'bandwidth_tolerance': 0.01,
        # 真实硬件上测得的 205 kbps 作为带宽下限
        'min_bandwidth_bps': 205000.0,
    },
    Scenario.DEFENSE: {
        'mode': 'delay_to_worst',
        'target_latency': None,
        'samples': 10000,
        'pair_samples': 1000,
        'n_bits': 10000,
        'keys': 20,
        'trials': 4000,
        'training_samples': 100000,
        'rounds': 50,
        'votes': 40,
        'near_lines': 2,
        # 最后一个注入率位于 NoC 饱和区
        'load_rates': [0.0, 0.02, 0.05, 0.1, 0.3],
        'load_bits': 2000,
        'max_ks': 0.05,
        'max_toy_accuracy': 0.55,
        'min_vote_pvalue': 0.05,
        'max_key_byte_accuracy': 0.05,
        'max_load_accuracy': 0.65,
    },
    Scenario.NOC_SWEEP: {
        'rates': '0.01:0.2:0.01',
        'sim_cycles': 20000,
        'warmup_cycles': 2000,
        'packet_flits': 5,
        'knee_rate': 0.1,
        'knee_latency': 100.0,
    },
    Scenario.PREFETCHW_TIMER: {
        'timer_tile': 8,
        'writer_tile': 0,
        'samples': 1000,
        'addr': 0x300000,
    },
    Scenario.LATENCY_MAP: {
        'addr': 0x500000,
        'home_tile': 0,
        'samples': 100,
    },
}
