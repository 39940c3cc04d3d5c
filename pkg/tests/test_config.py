import json

import pytest

from config import Config, load_config
from utils.validation import ConfigError


def test_defaults(quiet_env):
    config = Config()
    assert config.get('model.embed_dim') == 16
    assert config.get('optimizer.beta2') == 0.98
    assert config.get('generator.snr_db') == 2.0
    assert config.get('threshold.eta') == 0.5
    assert config.get('bench.threads') == 1
    assert config.get('missing.key', 'fallback') == 'fallback'


def test_file_overrides_are_merged(quiet_env, tmp_path):
    path = tmp_path / 'cfg.json'
    path.write_text(json.dumps({'model': {'n_heads': 4}, 'log_level': 'DEBUG'}))
    config = load_config(str(path))
    assert config.get('model.n_heads') == 4
    assert config.get('model.embed_dim') == 16
    assert config.get('log_level') == 'DEBUG'


@pytest.mark.parametrize("content", ['{not json', '[1, 2]'])
def test_bad_config_file(quiet_env, tmp_path, content):
    path = tmp_path / 'cfg.json'
    path.write_text(content)
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_missing_config_file(quiet_env, tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / 'absent.json'))


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv('FSTA_THREADS', '3')
    assert Config().get('bench.threads') == 3
    monkeypatch.setenv('FSTA_THREADS', 'many')
    with pytest.raises(ConfigError):
        Config()
    monkeypatch.setenv('FSTA_THREADS', '0')
    with pytest.raises(ConfigError):
        Config()


def test_override_skips_unset_flags(quiet_env):
    config = Config()
    config.override({'optimizer.epochs': 5, 'optimizer.seed': None})
    assert config.get('optimizer.epochs') == 5
    assert config.get('optimizer.seed') == 42


def test_save_and_flatten(quiet_env, tmp_path):
    config = Config()
    config.set('threshold.eta', 0.3)
    path = tmp_path / 'out' / 'saved.json'
    config.save(str(path))
    assert load_config(str(path)).get('threshold.eta') == 0.3
    flat = config.flatten()
    assert flat['threshold.eta'] == 0.3
    assert 'model.variant' in flat
    with pytest.raises(ConfigError):
        config.set('', 1)


def test_section_is_a_copy(quiet_env):
    config = Config()
    section = config.section('model')
    section['embed_dim'] = 99
    assert config.get('model.embed_dim') == 16
