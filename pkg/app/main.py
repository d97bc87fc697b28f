from app.cli.app import create_app

# Create and configure the application
app = create_app()


def main() -> None:
    app()


if __name__ == "__main__":
    main()
