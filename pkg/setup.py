#!/usr/bin/env python3
"""
Setup script for the Constrained MDP Mixture Suite.

This script helps users set up the application and check for dependencies.
"""

import sys
import subprocess
import platform
from pathlib import Path


REQUIRED_DEPENDENCIES = {
    'numpy': 'numpy (dense linear algebra)',
    'scipy': 'scipy (LU factorization, low-discrepancy weights)',
    'networkx': 'networkx (support graphs and end components)',
}

OPTIONAL_DEPENDENCIES = {
    'dotenv': 'python-dotenv (.env configuration)',
    'pytest': 'pytest (test suite)',
}


def check_python_version():
    """Check if Python version is compatible."""
    if sys.version_info < (3, 8):
        print("❌ Python 3.8 or higher is required.")
        print(f"   Current version: {platform.python_version()}")
        return False
    else:
        print(f"✅ Python {platform.python_version()} - Compatible")
        return True


def _check_modules(modules):
    available = []
    missing = []
    for module, description in modules.items():
        try:
            __import__(module)
            available.append(description)
        except ImportError:
            missing.append(description)
    return available, missing


def check_required_dependencies():
    """Check for the numerical dependencies the solver cannot run without."""
    available, missing = _check_modules(REQUIRED_DEPENDENCIES)
    for dep in available:
        print(f"✅ {dep}")
    for dep in missing:
        print(f"❌ {dep} not installed")
    return not missing


def check_optional_dependencies():
    """Check for optional Python dependencies."""
    available, missing = _check_modules(OPTIONAL_DEPENDENCIES)

    if available:
        print("\n✅ Available optional dependencies:")
        for dep in available:
            print(f"   - {dep}")

    if missing:
        print("\n⚠️  Missing optional dependencies:")
        for dep in missing:
            print(f"   - {dep}")

    return len(missing) == 0


def install_dependencies():
    """Install Python dependencies from requirements.txt."""
    print("\n📦 Installing Python dependencies...")
    requirements = Path(__file__).parent / 'requirements.txt'

    try:
        subprocess.run([sys.executable, '-m', 'pip', 'install', '-r', str(requirements)],
                       check=True)
        print("✅ Installed requirements")
        return True

    except subprocess.CalledProcessError as e:
        print(f"❌ Failed to install dependencies: {e}")
        return False


def test_application():
    """Test if the application can be imported and run."""
    print("\n🧪 Testing application...")

    try:
        sys.path.insert(0, str(Path(__file__).parent))
        from cmix import main
        print("✅ Application imports successfully")

        result = subprocess.run([sys.executable, 'cmix.py', '--help'],
                                capture_output=True, text=True, timeout=10,
                                cwd=str(Path(__file__).parent))
        if result.returncode == 0:
            print("✅ Application help command works")
            return True
        else:
            print("❌ Application help command failed")
            return False

    except Exception as e:
        print(f"❌ Application test failed: {e}")
        return False


def main():
    """Main setup function."""
    print("🚀 Constrained MDP Mixture Suite Setup")
    print("=" * 50)

    print("\n📋 Checking system requirements...")

    python_ok = check_python_version()
    if not python_ok:
        print("\n❌ Setup failed: Python version incompatible")
        return 1

    required_ok = check_required_dependencies()
    optional_ok = check_optional_dependencies()

    if not (required_ok and optional_ok):
        response = input("\n❓ Install missing Python dependencies? (y/N): ").strip().lower()
        if response in ['y', 'yes']:
            required_ok = install_dependencies() and check_required_dependencies()

    app_ok = required_ok and test_application()

    print("\n" + "=" * 50)
    print("📊 Setup Summary:")
    print(f"   Python: {'✅' if python_ok else '❌'}")
    print(f"   Numerical stack: {'✅' if required_ok else '❌'}")
    print(f"   Application: {'✅' if app_ok else '❌'}")

    if app_ok:
        print("\n🎉 Setup completed successfully!")
        print("\n🚀 You can now run the application:")
        print("   python cmix.py --help                          # Command line help")
        print("   python cmix.py solve models/twoact.json        # Example command")
        print("   python -m pytest tests                         # Test suite")
        return 0
    else:
        print("\n❌ Setup incomplete. Please resolve the issues above.")
        return 1


if __name__ == '__main__':
    exit_code = main()
    sys.exit(exit_code)
