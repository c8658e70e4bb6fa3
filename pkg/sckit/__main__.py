from .command_line import main_sck


if __name__ == "__main__":
    main_sck()
