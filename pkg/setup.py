import os
import shutil
import subprocess
import sys
import venv

MIN_PYTHON = (3, 9)
VENV_DIR = 'venv'


def is_windows():
    return sys.platform == 'win32'


def venv_python():
    if is_windows():
        return os.path.join(VENV_DIR, 'Scripts', 'python.exe')
    return os.path.join(VENV_DIR, 'bin', 'python3')


def check_python_version():
    if sys.version_info < MIN_PYTHON:
        print(f"[-] alstop needs Python {'.'.join(map(str, MIN_PYTHON))} or newer, found {sys.version.split()[0]}.")
        sys.exit(1)
    print(f"[+] Python {sys.version.split()[0]}")


def prepare_virtualenv():
    """Create venv/, or rebuild it when the user asks to."""
    if os.path.isdir(VENV_DIR):
        answer = input("[?] A virtual environment already exists. Rebuild it from scratch? (y/n): ")
        if answer.lower() != 'y':
            print("[!] Keeping the existing virtual environment.")
            return
        print("[!] Removing the existing virtual environment...")
        shutil.rmtree(VENV_DIR)
    venv.EnvBuilder(with_pip=True).create(VENV_DIR)
    print("[+] Virtual environment created in venv/.")


def install_requirements(requirements_file):
    path = os.path.join("requirements", requirements_file)
    try:
        subprocess.check_call([venv_python(), "-m", "pip", "install", "--upgrade", "pip"])
        subprocess.check_call([venv_python(), "-m", "pip", "install", "-r", path])
        print(f"[+] Installed the packages listed in {path}.")
    except subprocess.CalledProcessError as e:
        print(f"[-] Installing from {path} failed: {e}")
        sys.exit(1)


def copy_template(src, dest):
    """
    Copy a settings template, asking before an existing file is replaced.

    Existing settings files are usually customized, so the default answer keeps them.
    """
    if os.path.exists(dest):
        answer = input(f"[?] {dest} already exists. Replace it with a fresh copy of {src}? (y/n): ")
        if answer.lower() != 'y':
            print(f"[!] Keeping {dest}")
            return
    shutil.copy(src, dest)
    print(f"[+] Copied {src} to {dest}")


def write_launcher():
    if is_windows():
        name = 'alstop.bat'
        lines = ['@echo off', 'cd /d "%~dp0"', 'venv\\Scripts\\python.exe main.py %*']
    else:
        name = 'alstop.sh'
        lines = ['#!/bin/bash', 'cd "$(dirname "$0")"', 'venv/bin/python3 main.py "$@"']
    with open(name, 'w') as f:
        f.write('\n'.join(lines) + '\n')
    if not is_windows():
        os.chmod(name, 0o755)
    print(f"[+] Created {name}")
    return name


def smoke_check():
    """Run the runs test on a short sequence to confirm the install imports cleanly."""
    result = subprocess.run(
        [venv_python(), 'main.py', '--quiet', 'runstest', '--mode', 'exact'],
        input='\n'.join(str(v) for v in (3, 1, 4, 1, 5, 9, 2, 6, 5, 3)),
        capture_output=True, text=True,
    )
    if result.returncode == 0:
        print("[+] Smoke check passed.")
    else:
        print(f"[-] Smoke check failed:\n{result.stderr.strip()}")


def main():
    print("===== alstop Setup =====")
    print()
    check_python_version()
    prepare_virtualenv()
    install_requirements("requirements.txt")

    copy_template('config_default.py', 'config.py')
    copy_template('.env.example', '.env')
    print("[!] ALSTOP_<KEY> entries in .env override the matching setting in config.py")

    launcher = write_launcher()
    smoke_check()

    print()
    print("===== Setup Complete =====")
    print(f"[!] Try: {'' if is_windows() else './'}{launcher} run --config experiments/artificial.json")
    print("[!] The test suite runs with: venv/bin/python3 -m pytest -m 'not slow'")


if __name__ == "__main__":
    main()
