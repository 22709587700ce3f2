import os
import importlib.util
import json
import re

from dotenv import load_dotenv

ENV_PREFIX = "ALSTOP_"
NEW_SECTION_HEADER = "# New configuration items"
EXISTING_SECTION_HEADER = "# Existing configuration"
NEW_SECTION_PATTERN = re.compile(
    re.escape(NEW_SECTION_HEADER) + r"\n(.*?)\n" + re.escape(EXISTING_SECTION_HEADER), re.DOTALL)


class ConfigLoader:
    """
    Config class to load and merge default and user-specific configuration settings.

    This class imports the default configuration settings from `config_default.py`
    and overrides them with any user-specific settings defined in `config.py` if it exists.
    Environment variables named `ALSTOP_<KEY>` (a `.env` file is read first) override both.
    The merged configuration settings are available as attributes of the Config instance.

    If new configuration items are found in the default config that are not in the user's
    config, they are automatically appended to the top of the user's config.py file,
    or under an existing "New configuration items" section if present.

    Usage:
        from config_loader import config

        print(config.ALPHA)
        print(config.POOL_SIZE)
    """

    def __init__(self, default_config_path=None, user_config_path=None, environ=None):
        script_dir = os.path.dirname(os.path.abspath(__file__))
        default_config_path = default_config_path or os.path.join(script_dir, 'config_default.py')
        user_config_path = user_config_path or os.path.join(script_dir, 'config.py')

        default_config = self._import_config(default_config_path)
        default_keys = self._public_keys(default_config)

        user_config = None
        if os.path.exists(user_config_path):
            user_config = self._import_config(user_config_path)
            new_keys = [key for key in default_keys if not hasattr(user_config, key)]
            if new_keys:
                self._append_new_keys(user_config_path, default_config, new_keys)
                user_config = self._import_config(user_config_path)

        for key in default_keys:
            setattr(self, key, getattr(user_config, key, getattr(default_config, key)))

        if user_config is not None:
            for key in self._public_keys(user_config):
                if key not in default_keys:
                    setattr(self, key, getattr(user_config, key))

        if environ is None:
            load_dotenv()
            environ = os.environ
        self._apply_environment(environ)

    def as_dict(self):
        return {key: value for key, value in self.__dict__.items() if key.isupper()}

    def _import_config(self, config_path):
        spec = importlib.util.spec_from_file_location("config", config_path)
        config = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(config)
        return config

    def _public_keys(self, module):
        return [key for key in module.__dict__ if key.isupper() and not key.startswith('__')]

    def _apply_environment(self, environ):
        for name, raw in environ.items():
            if not name.startswith(ENV_PREFIX):
                continue
            key = name[len(ENV_PREFIX):]
            try:
                value = json.loads(raw)
            except ValueError:
                value = raw
            setattr(self, key, value)

    def _append_new_keys(self, config_path, default_config, new_keys):
        """Write missing default settings into the user's config.py, keeping their edits intact."""
        with open(config_path, 'r') as f:
            content = f.read()

        match = NEW_SECTION_PATTERN.search(content)
        section = match.group(1) if match else ''
        present = set(re.findall(r'^([A-Z][A-Z0-9_]*)\s*=', section, re.MULTILINE))
        additions = ''.join(
            f'{key} = {getattr(default_config, key)!r}\n' for key in new_keys if key not in present
        )
        block = f'{NEW_SECTION_HEADER}\n{section}{additions}\n{EXISTING_SECTION_HEADER}'

        if match:
            content = content[:match.start()] + block + content[match.end():]
        else:
            content = f'{block}\n{content}'

        with open(config_path, 'w') as f:
            f.write(content)


# Create a global config object
config = ConfigLoader()
