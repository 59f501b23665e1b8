from guidenet.main import main

main()
